#include "gespi/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gespi {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV.

struct CsvDocument {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  std::optional<std::size_t> find(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }

  std::size_t require(const std::string& name) const {
    if (auto col = find(name)) return *col;
    throw IngestionError(source + ": missing required column '" + name + "'");
  }

  [[noreturn]] void fail(std::size_t row, std::size_t col, const std::string& what) const {
    throw IngestionError(source + ":" + std::to_string(lines[row]) + ": column '" +
                         header[col] + "': " + what);
  }

  const std::string& cell(std::size_t row, std::size_t col) const { return rows[row][col]; }

  double number(std::size_t row, std::size_t col) const {
    const std::string& text = cell(row, col);
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || text.empty()) {
      fail(row, col, "'" + text + "' is not a number");
    }
    if (!std::isfinite(value)) fail(row, col, "NaN and infinite values are not allowed");
    return value;
  }

  bool boolean(std::size_t row, std::size_t col) const {
    const std::string& text = cell(row, col);
    if (text == "1" || text == "true" || text == "TRUE" || text == "True") return true;
    if (text == "0" || text == "false" || text == "FALSE" || text == "False") return false;
    fail(row, col, "'" + text + "' is not a boolean (expected 0/1 or true/false)");
  }
};

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line, const std::string& source,
                                        std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field += ch;
    }
  }
  if (quoted) {
    throw IngestionError(source + ":" + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(was_quoted ? field : trim(field));
  return fields;
}

CsvDocument parse_csv(std::istream& in, const std::string& source) {
  CsvDocument doc;
  doc.source = source;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, source, line_no);
    if (!have_header) {
      doc.header = std::move(fields);
      std::set<std::string> seen;
      for (const auto& h : doc.header) {
        if (h.empty()) throw IngestionError(source + ": empty column name in header");
        if (!seen.insert(h).second) {
          throw IngestionError(source + ": duplicate column '" + h + "'");
        }
      }
      have_header = true;
      continue;
    }
    if (fields.size() != doc.header.size()) {
      throw IngestionError(source + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(doc.header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    doc.rows.push_back(std::move(fields));
    doc.lines.push_back(line_no);
  }
  if (!have_header) throw IngestionError(source + ": missing header row");
  return doc;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path + ": cannot open file");
  return in;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// ---------------------------------------------------------------------------
// JSON configuration.

// Reads keys of one JSON object and rejects any it was never asked about.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw IngestionError(where() + " must be a JSON object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return object_.contains(key);
  }

  const json& get(const std::string& key) {
    used_.insert(key);
    return object_.at(key);
  }

  void number(const std::string& key, double& target) {
    if (!has(key)) return;
    const json& v = object_.at(key);
    if (!v.is_number()) throw IngestionError(field(key) + " must be a number");
    target = v.get<double>();
  }

  void count(const std::string& key, std::size_t& target) {
    if (!has(key)) return;
    target = static_cast<std::size_t>(unsigned_value(key));
  }

  void seed(const std::string& key, std::uint64_t& target) {
    if (has(key)) target = unsigned_value(key);
  }

  void boolean(const std::string& key, bool& target) {
    if (!has(key)) return;
    const json& v = object_.at(key);
    if (!v.is_boolean()) throw IngestionError(field(key) + " must be true or false");
    target = v.get<bool>();
  }

  std::optional<std::string> string(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = object_.at(key);
    if (!v.is_string()) throw IngestionError(field(key) + " must be a string");
    return v.get<std::string>();
  }

  std::string field(const std::string& key) const {
    return "field '" + (path_.empty() ? key : path_ + "." + key) + "'";
  }

  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    std::vector<std::string> unknown;
    for (const auto& [key, value] : object_.items()) {
      if (!used_.count(key)) unknown.push_back(child_path(key));
    }
    if (unknown.empty()) return;
    std::string msg = "unknown configuration key";
    msg += unknown.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", " : "") + unknown[i];
    throw IngestionError(msg);
  }

 private:
  std::string where() const { return path_.empty() ? "configuration" : "field '" + path_ + "'"; }

  std::uint64_t unsigned_value(const std::string& key) const {
    const json& v = object_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    throw IngestionError(field(key) + " must be a nonnegative integer");
  }

  const json& object_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<double> number_array(const json& v, const std::string& name) {
  if (!v.is_array()) throw IngestionError("field '" + name + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw IngestionError("field '" + name + "' must hold only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

ScoreModel parse_score_model(const json& v, const std::string& path, ScoreModel model) {
  ObjectReader r(v, path);
  r.number("mean", model.mean);
  r.number("sd", model.sd);
  const bool has_support = r.has("support");
  const bool has_probs = r.has("probs");
  if (has_support != has_probs) {
    throw IngestionError("field '" + path + "' needs both support and probs");
  }
  if (has_support) {
    try {
      model.discrete = DiscreteDist(number_array(r.get("support"), path + ".support"),
                                    number_array(r.get("probs"), path + ".probs"));
    } catch (const std::domain_error& e) {
      throw IngestionError("field '" + path + "': " + e.what());
    }
  }
  r.finish();
  return model;
}

GuardrailVariant parse_variant(const std::string& name) {
  if (name == "two_sided" || name == "TwoSided") return GuardrailVariant::TwoSided;
  if (name == "one_sided" || name == "OneSided") return GuardrailVariant::OneSided;
  throw std::domain_error("variant must be 'one_sided' or 'two_sided', got '" + name + "'");
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).string();
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IngestionError(source + ": invalid JSON: " + e.what());
  }
}

double json_number(const json& v, const std::string& what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw IngestionError(what + " must be a number");
}

json json_value(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> grid_values(double start, double stop, double step) {
  if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(stop)) {
    throw std::domain_error("sweep grid needs finite start/stop and step > 0");
  }
  if (stop < start) throw std::domain_error("sweep grid needs stop >= start");
  const double span = (stop - start) / step;
  const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  std::vector<double> values;
  values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Round to 12 significant digits so 0.45 + 2 * 0.05 becomes 0.55.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", start + static_cast<double>(i) * step);
    values.push_back(std::strtod(buf, nullptr));
  }
  return values;
}

ExperimentSpec parse_config_text(const std::string& json_text, std::optional<Task> task,
                                 const std::string& base_dir) {
  const json root = parse_json_text(json_text.empty() ? "{}" : json_text, "configuration");
  ObjectReader r(root, "");

  if (auto name = r.string("task")) {
    const Task from_file = parse_task(*name);
    if (task && *task != from_file) {
      throw IngestionError("configuration task '" + *name + "' does not match requested task '" +
                           to_string(*task) + "'");
    }
    task = from_file;
  }
  ExperimentSpec spec = default_spec(task.value_or(Task::BinomialTest));

  r.number("rho", spec.rho);
  r.number("rho_synt", spec.rho_synt);
  r.count("n", spec.n);
  r.count("N", spec.N);
  r.number("alpha", spec.alpha);
  r.number("epsilon", spec.epsilon);
  r.count("inner_trials", spec.inner_trials);
  r.count("outer_reps", spec.outer_reps);
  r.seed("seed", spec.seed);
  if (auto v = r.string("variant")) spec.variant = parse_variant(*v);

  if (r.has("methods")) {
    const json& m = r.get("methods");
    if (!m.is_array() || m.empty()) {
      throw IngestionError("field 'methods' must be a nonempty array of method names");
    }
    spec.methods.clear();
    for (const auto& x : m) {
      if (!x.is_string()) throw IngestionError("field 'methods' must hold strings");
      spec.methods.push_back(parse_method(x.get<std::string>()));
    }
  }

  if (r.has("sweep")) {
    ObjectReader s(r.get("sweep"), "sweep");
    if (auto p = s.string("param")) spec.sweep.param = *p;
    const bool has_values = s.has("values");
    const bool has_range = s.has("start") || s.has("stop") || s.has("step");
    if (has_values && has_range) {
      throw IngestionError("field 'sweep' takes either values or start/stop/step, not both");
    }
    if (has_values) {
      spec.sweep.values = number_array(s.get("values"), "sweep.values");
      if (spec.sweep.values.empty()) throw std::domain_error("field 'sweep.values' must be nonempty");
    } else if (has_range) {
      double start = 0.0, stop = 0.0, step = 0.0;
      if (!s.has("start") || !s.has("stop") || !s.has("step")) {
        throw IngestionError("field 'sweep' needs all of start, stop and step");
      }
      s.number("start", start);
      s.number("stop", stop);
      s.number("step", step);
      spec.sweep.values = grid_values(start, stop, step);
    }
    s.finish();
  }

  if (r.has("contamination")) {
    ObjectReader c(r.get("contamination"), "contamination");
    auto& cs = spec.contamination;
    c.count("dimension", cs.dimension);
    c.number("outlier_shift", cs.outlier_shift);
    c.number("contamination_rate", cs.contamination_rate);
    c.number("trim_rate", cs.trim_rate);
    c.count("training_size", cs.training_size);
    c.count("test_inliers", cs.test_inliers);
    c.count("test_outliers", cs.test_outliers);
    c.count("batch_count", cs.batch_count);
    c.finish();
  }

  if (r.has("conformal")) {
    ObjectReader c(r.get("conformal"), "conformal");
    if (c.has("real")) spec.conformal.real = parse_score_model(c.get("real"), "conformal.real", spec.conformal.real);
    if (c.has("synth")) spec.conformal.synth = parse_score_model(c.get("synth"), "conformal.synth", spec.conformal.synth);
    c.finish();
  }

  if (r.has("risk")) {
    ObjectReader c(r.get("risk"), "risk");
    auto& rs = spec.risk;
    c.count("residues", rs.residues);
    c.count("test_items", rs.test_items);
    c.number("lambda_step", rs.lambda_step);
    c.number("error_cutoff", rs.error_cutoff);
    c.number("proxy_bias", rs.proxy_bias);
    c.number("proxy_noise", rs.proxy_noise);
    c.boolean("zero_loss_proxy", rs.zero_loss_proxy);
    c.finish();
  }

  if (r.has("winrate")) {
    ObjectReader c(r.get("winrate"), "winrate");
    auto& ws = spec.winrate;
    if (auto path = c.string("records")) ws.records = read_winrate_file(resolve(base_dir, *path));
    c.boolean("shuffled", ws.shuffled);
    c.number("p_win", ws.p_win);
    c.number("p_loss", ws.p_loss);
    c.number("p_win_synth", ws.p_win_synth);
    c.number("p_loss_synth", ws.p_loss_synth);
    c.count("real_pool", ws.real_pool);
    c.count("synth_pool", ws.synth_pool);
    c.finish();
  }

  if (r.has("two_sample")) {
    ObjectReader c(r.get("two_sample"), "two_sample");
    c.number("effect", spec.two_sample.effect);
    c.number("effect_synth", spec.two_sample.effect_synth);
    c.count("n_perms", spec.two_sample.n_perms);
    c.finish();
  }

  r.finish();
  spec.validate();
  return spec;
}

ExperimentSpec parse_config(const std::string& path, std::optional<Task> task) {
  std::ifstream in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  try {
    return parse_config_text(buffer.str(), task, dir.empty() ? "." : dir.string());
  } catch (const IngestionError& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw std::domain_error("format must be 'csv' or 'json', got '" + name + "'");
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

namespace {
constexpr const char* kMetricsHeader =
    "sweep_param,sweep_value,method,metric,mean,std,inner_trials,outer_reps,seed";
}

void write_metrics_csv(const MetricsTable& table, std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const auto& r : table.rows) {
    out << csv_field(r.sweep_param) << ',' << format_number(r.sweep_value) << ','
        << csv_field(r.method) << ',' << csv_field(r.metric) << ',' << format_number(r.mean)
        << ',' << format_number(r.std) << ',' << r.inner_trials << ',' << r.outer_reps << ','
        << r.seed << '\n';
  }
}

void write_metrics_json(const MetricsTable& table, std::ostream& out) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : table.rows) {
    ordered_json row;
    row["sweep_param"] = r.sweep_param;
    row["sweep_value"] = json_value(r.sweep_value);
    row["method"] = r.method;
    row["metric"] = r.metric;
    row["mean"] = json_value(r.mean);
    row["std"] = json_value(r.std);
    row["inner_trials"] = r.inner_trials;
    row["outer_reps"] = r.outer_reps;
    row["seed"] = r.seed;
    rows.push_back(std::move(row));
  }
  out << rows.dump(2) << '\n';
}

void emit_results(const MetricsTable& table, const std::string& path, OutputFormat format) {
  auto write = [&](std::ostream& os) {
    if (format == OutputFormat::Csv) write_metrics_csv(table, os);
    else write_metrics_json(table, os);
  };
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  write(out);
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

MetricsTable read_metrics_csv(std::istream& in, const std::string& source) {
  // Metrics may legitimately hold "inf", so they are parsed here rather than
  // through CsvDocument::number.
  const CsvDocument doc = parse_csv(in, source);
  std::ostringstream expected;
  for (std::size_t i = 0; i < doc.header.size(); ++i) expected << (i ? "," : "") << doc.header[i];
  if (expected.str() != kMetricsHeader) {
    throw IngestionError(source + ": header must be '" + std::string(kMetricsHeader) + "'");
  }
  auto number = [&](std::size_t row, std::size_t col) {
    const std::string& s = doc.cell(row, col);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      doc.fail(row, col, "'" + s + "' is not a number");
    }
    return v;
  };
  auto integer = [&](std::size_t row, std::size_t col) {
    const std::string& s = doc.cell(row, col);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      doc.fail(row, col, "'" + s + "' is not a nonnegative integer");
    }
    return v;
  };
  MetricsTable table;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    MetricsRow r;
    r.sweep_param = doc.cell(i, 0);
    r.sweep_value = number(i, 1);
    r.method = doc.cell(i, 2);
    r.metric = doc.cell(i, 3);
    r.mean = number(i, 4);
    r.std = number(i, 5);
    r.inner_trials = integer(i, 6);
    r.outer_reps = integer(i, 7);
    r.seed = integer(i, 8);
    table.rows.push_back(std::move(r));
  }
  return table;
}

MetricsTable read_metrics_json(std::istream& in, const std::string& source) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const json root = parse_json_text(buffer.str(), source);
  if (!root.is_array()) throw IngestionError(source + ": expected a JSON array of rows");
  MetricsTable table;
  for (const auto& item : root) {
    ObjectReader r(item, "row");
    MetricsRow row;
    row.sweep_param = r.string("sweep_param").value_or("");
    row.sweep_value = json_number(r.get("sweep_value"), "sweep_value");
    row.method = r.string("method").value_or("");
    row.metric = r.string("metric").value_or("");
    row.mean = json_number(r.get("mean"), "mean");
    row.std = json_number(r.get("std"), "std");
    r.count("inner_trials", row.inner_trials);
    r.count("outer_reps", row.outer_reps);
    r.seed("seed", row.seed);
    r.finish();
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------

ScoreTable read_scores_csv(std::istream& in, const std::string& source) {
  const CsvDocument doc = parse_csv(in, source);
  const std::size_t value = doc.require("value");
  const auto group = doc.find("group");
  ScoreTable table;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    table.values.push_back(doc.number(i, value));
    if (group) table.groups.push_back(doc.cell(i, *group));
  }
  if (table.values.empty()) throw IngestionError(source + ": no score rows");
  return table;
}

ScoreTable read_scores_file(const std::string& path) {
  auto in = open_input(path);
  return read_scores_csv(in, path);
}

std::vector<WinRateRecord> read_winrate_csv(std::istream& in, const std::string& source) {
  const CsvDocument doc = parse_csv(in, source);
  const std::size_t id = doc.require("item_id");
  const std::size_t a = doc.require("model_a_correct");
  const std::size_t b = doc.require("model_b_correct");
  const std::size_t src = doc.require("source");
  std::vector<WinRateRecord> records;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    WinRateRecord r;
    r.item_id = doc.cell(i, id);
    r.model_a_correct = doc.boolean(i, a);
    r.model_b_correct = doc.boolean(i, b);
    const std::string& s = doc.cell(i, src);
    if (s == "real") r.synthetic = false;
    else if (s == "synthetic") r.synthetic = true;
    else doc.fail(i, src, "'" + s + "' must be 'real' or 'synthetic'");
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<WinRateRecord> read_winrate_file(const std::string& path) {
  auto in = open_input(path);
  return read_winrate_csv(in, path);
}

PValueVector read_pvalues_csv(std::istream& in, const std::string& source) {
  const CsvDocument doc = parse_csv(in, source);
  const std::size_t id = doc.require("hypothesis_id");
  const std::size_t pv = doc.require("pvalue");
  const std::size_t m = doc.rows.size();
  if (m == 0) throw IngestionError(source + ": no p-value rows");
  std::vector<double> values(m, -1.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double h = doc.number(i, id);
    if (h != std::floor(h) || h < 1 || h > static_cast<double>(m)) {
      doc.fail(i, id, "hypothesis ids must be 1..m");
    }
    const auto j = static_cast<std::size_t>(h) - 1;
    if (values[j] >= 0.0) doc.fail(i, id, "duplicate hypothesis id");
    const double p = doc.number(i, pv);
    if (!(p > 0.0 && p <= 1.0)) doc.fail(i, pv, "p-values must lie in (0, 1]");
    values[j] = p;
  }
  return PValueVector(std::move(values));
}

PValueVector read_pvalues_file(const std::string& path) {
  auto in = open_input(path);
  return read_pvalues_csv(in, path);
}

RiskGrid read_risk_grid_csv(std::istream& in, double bound, LossMonotonicity monotonicity,
                            const std::string& source) {
  const CsvDocument doc = parse_csv(in, source);
  const std::size_t pid = doc.require("point_id");
  const std::size_t lam = doc.require("lambda");
  const std::size_t loss = doc.require("loss");
  // point id -> (lambda -> loss), points in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::map<double, double>> table;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    const std::string& p = doc.cell(i, pid);
    if (!table.count(p)) order.push_back(p);
    const double l = doc.number(i, lam);
    if (!table[p].emplace(l, doc.number(i, loss)).second) {
      doc.fail(i, lam, "duplicate lambda for point '" + p + "'");
    }
  }
  if (order.empty()) throw IngestionError(source + ": no risk-grid rows");
  std::vector<double> lambdas;
  for (const auto& [l, v] : table[order.front()]) lambdas.push_back(l);
  std::vector<double> losses;
  for (const auto& p : order) {
    const auto& row = table[p];
    if (row.size() != lambdas.size() ||
        !std::equal(lambdas.begin(), lambdas.end(), row.begin(),
                    [](double l, const auto& kv) { return l == kv.first; })) {
      throw IngestionError(source + ": point '" + p + "' does not use the same lambda grid");
    }
    for (const auto& [l, v] : row) losses.push_back(v);
  }
  try {
    return RiskGrid(std::move(lambdas), std::move(losses), bound, monotonicity);
  } catch (const std::domain_error& e) {
    throw IngestionError(source + ": " + e.what());
  }
}

RiskGrid read_risk_grid_file(const std::string& path, double bound,
                             LossMonotonicity monotonicity) {
  auto in = open_input(path);
  return read_risk_grid_csv(in, bound, monotonicity, path);
}

OutlierTable read_outlier_csv(std::istream& in, const std::string& source) {
  const CsvDocument doc = parse_csv(in, source);
  const auto score = doc.find("score");
  const auto label = doc.find("label");
  OutlierTable table;
  std::vector<std::size_t> feature_cols;
  if (!score) {
    for (std::size_t c = 0; c < doc.header.size(); ++c) {
      if (!label || c != *label) feature_cols.push_back(c);
    }
    if (feature_cols.empty()) {
      throw IngestionError(source + ": needs a 'score' column or feature columns");
    }
  }
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    if (score) {
      table.scores.push_back(doc.number(i, *score));
    } else {
      std::vector<double> x;
      for (std::size_t c : feature_cols) x.push_back(doc.number(i, c));
      table.features.push_back(std::move(x));
    }
    if (label) {
      const double l = doc.number(i, *label);
      if (l != 0.0 && l != 1.0) doc.fail(i, *label, "labels must be 0 or 1");
      table.labels.push_back(static_cast<int>(l));
    }
  }
  if (doc.rows.empty()) throw IngestionError(source + ": no data rows");
  return table;
}

OutlierTable read_outlier_file(const std::string& path) {
  auto in = open_input(path);
  return read_outlier_csv(in, path);
}

}  // namespace gespi
