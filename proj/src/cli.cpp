#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gespi/bounds_oracles.hpp"
#include "gespi/cli_io.hpp"
#include "gespi/hypothesis_tests.hpp"

namespace gespi {

namespace {

using ordered_json = nlohmann::ordered_json;

unsigned default_workers() {
  if (const char* env = std::getenv("GESPI_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw std::domain_error(std::string("GESPI_WORKERS must be a positive integer, got '") +
                            env + "'");
  }
  return 1;
}

ordered_json number_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

GuardrailVariant variant_from(const std::string& name) {
  if (name == "two_sided") return GuardrailVariant::TwoSided;
  if (name == "one_sided") return GuardrailVariant::OneSided;
  throw std::domain_error("variant must be 'one_sided' or 'two_sided'");
}

ordered_json decision_json(const TestDecision& d) {
  ordered_json j;
  j["decision"] = d.decision.value();
  j["pvalue"] = d.pvalue ? ordered_json(*d.pvalue) : ordered_json(nullptr);
  j["randomization_used"] = d.randomization_used;
  return j;
}

ordered_json members_json(const RejectionSet& s) {
  ordered_json arr = ordered_json::array();
  for (auto m : s.members()) arr.push_back(m);
  return arr;
}

// Score of each feature row: Euclidean distance to the centroid of `reference`.
std::vector<double> centroid_scores(const std::vector<std::vector<double>>& reference,
                                    const std::vector<std::vector<double>>& rows) {
  const std::size_t d = reference.front().size();
  std::vector<double> centroid(d, 0.0);
  for (const auto& x : reference) {
    if (x.size() != d) throw IngestionError("feature rows differ in width");
    for (std::size_t k = 0; k < d; ++k) centroid[k] += x[k];
  }
  for (double& c : centroid) c /= static_cast<double>(reference.size());
  std::vector<double> out;
  for (const auto& x : rows) {
    if (x.size() != d) throw IngestionError("feature rows differ in width");
    double ss = 0.0;
    for (std::size_t k = 0; k < d; ++k) ss += (x[k] - centroid[k]) * (x[k] - centroid[k]);
    out.push_back(std::sqrt(ss));
  }
  return out;
}

struct Options {
  // simulate
  std::string task;
  std::string config;
  std::string output = "-";
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  // shared one-shot parameters
  double alpha = 0.05;
  double epsilon = 0.02;
  std::string variant = "two_sided";
  std::string real;
  std::string synth;
  // crc
  double bound = 1.0;
  std::string monotonicity = "nonincreasing";
  // tests
  std::string scores;
  std::optional<std::uint64_t> successes;
  std::optional<std::uint64_t> trials;
  std::uint64_t wins = 0, ties = 0, losses = 0;
  std::string records;
  std::size_t n_perms = 10000;
  std::string mode = "montecarlo";
  std::string cal;
  std::string test_file;
  std::optional<double> test_score;
  std::uint64_t test_seed = 0;
  // mt
  std::string pvalues;
  std::string pooled;
  std::string rule = "hochberg";
  std::size_t k = 1;
  // oracle
  std::uint64_t n = 0;
  std::uint64_t N = 0;
  double p = 0.5;
  double q = 0.5;
  double delta = 0.05;
  std::size_t r = 1;
  std::size_t oracle_trials = 100000;
  std::uint64_t oracle_seed = 0;
};

void print(std::ostream& out, const ordered_json& j) { out << j.dump(2) << '\n'; }

int cmd_simulate(const Options& o, std::ostream& err) {
  const Task task = parse_task(o.task);
  ExperimentSpec spec = o.config.empty() ? default_spec(task) : parse_config(o.config, task);
  if (o.seed) spec.seed = *o.seed;
  spec.validate();
  const unsigned workers = o.workers ? *o.workers : default_workers();
  if (workers < 1) throw std::domain_error("--workers must be >= 1");
  const MetricsTable table = run_experiment(spec, workers);
  if (table.sandwich_violations > 0) {
    err << "warning: " << table.sandwich_violations
        << " trials violated the base/guardrail ordering\n";
  }
  emit_results(table, o.output, parse_format(o.format));
  return 0;
}

int cmd_conformal(const Options& o, std::ostream& out) {
  const ScoreSample real(read_scores_file(o.real).values);
  const ScoreSample synth(o.synth.empty() ? std::vector<double>{}
                                          : read_scores_file(o.synth).values);
  GespiConfig cfg{o.alpha, o.epsilon, variant_from(o.variant), 0};
  cfg.validate();
  std::vector<double> pooled(real.values().begin(), real.values().end());
  pooled.insert(pooled.end(), synth.values().begin(), synth.values().end());
  ordered_json j;
  j["threshold"] = number_json(gespi_conformal_threshold(real.values(), synth.values(), cfg).threshold());
  j["base"] = number_json(conformal_quantile(real.values(), o.alpha).threshold());
  j["pooled"] = number_json(conformal_quantile(pooled, o.alpha).threshold());
  j["guardrail"] = number_json(conformal_quantile(real.values(), o.alpha + o.epsilon).threshold());
  print(out, j);
  return 0;
}

int cmd_crc(const Options& o, std::ostream& out) {
  LossMonotonicity mono;
  if (o.monotonicity == "nonincreasing") mono = LossMonotonicity::NonIncreasing;
  else if (o.monotonicity == "nondecreasing") mono = LossMonotonicity::NonDecreasing;
  else throw std::domain_error("--monotonicity must be 'nonincreasing' or 'nondecreasing'");
  const RiskGrid real = read_risk_grid_file(o.real, o.bound, mono);
  GespiConfig cfg{o.alpha, o.epsilon, variant_from(o.variant), 0};
  cfg.validate();
  const RiskGrid pooled =
      o.synth.empty() ? real : real.concat(read_risk_grid_file(o.synth, o.bound, mono));
  ordered_json j;
  j["lambda"] = number_json(gespi_crc(real, pooled, cfg).threshold());
  j["base"] = number_json(crc_lambda(real, o.alpha).threshold());
  j["pooled"] = number_json(crc_lambda(pooled, o.alpha).threshold());
  j["guardrail"] = number_json(crc_lambda(real, o.alpha + o.epsilon).threshold());
  print(out, j);
  return 0;
}

int cmd_test_sign(const Options& o, std::ostream& out) {
  BernoulliSample sample;
  if (!o.scores.empty()) {
    const auto values = read_scores_file(o.scores).values;
    sample.trials = values.size();
    sample.successes = static_cast<std::uint64_t>(
        std::count_if(values.begin(), values.end(), [](double x) { return x > 0.0; }));
  } else if (o.successes && o.trials) {
    sample = {*o.successes, *o.trials};
  } else {
    throw std::domain_error("sign test needs --scores or both --successes and --trials");
  }
  print(out, decision_json(sign_test(sample, o.alpha)));
  return 0;
}

int cmd_test_winrate(const Options& o, std::ostream& out) {
  Rng rng = make_rng(o.test_seed, {});
  const double u_real = uniform01(rng);
  const double u_pooled = uniform01(rng);
  if (o.records.empty()) {
    print(out, decision_json(winrate_test({o.wins, o.ties, o.losses}, o.alpha, u_real)));
    return 0;
  }
  TrinomialCounts real, synth;
  for (const auto& rec : read_winrate_file(o.records)) {
    auto& c = rec.synthetic ? synth : real;
    if (rec.model_a_correct && !rec.model_b_correct) ++c.wins;
    else if (rec.model_b_correct && !rec.model_a_correct) ++c.losses;
    else ++c.ties;
  }
  GespiConfig cfg{o.alpha, o.epsilon, variant_from(o.variant), 0};
  cfg.validate();
  const TrinomialCounts pooled{real.wins + synth.wins, real.ties + synth.ties,
                               real.losses + synth.losses};
  const TestDecision base = winrate_test(real, o.alpha, u_real);
  const TestDecision guard = winrate_test(real, o.alpha + o.epsilon, u_real);
  const TestDecision pool = winrate_test(pooled, o.alpha, u_pooled);
  const auto g = combine(cfg.variant, base.decision, pool.decision, guard.decision);
  ordered_json j;
  j["decision"] = g.action.value();
  j["base"] = decision_json(base);
  j["pooled"] = decision_json(pool);
  j["guardrail"] = decision_json(guard);
  print(out, j);
  return 0;
}

int cmd_test_permutation(const Options& o, std::ostream& out) {
  const ScoreTable table = read_scores_file(o.scores);
  if (table.groups.empty()) throw IngestionError(o.scores + ": permutation test needs a group column");
  TwoSampleData data;
  for (std::size_t i = 0; i < table.values.size(); ++i) {
    const auto& g = table.groups[i];
    if (g == "a" || g == "A") data.group_a.push_back(table.values[i]);
    else if (g == "b" || g == "B") data.group_b.push_back(table.values[i]);
    else throw IngestionError(o.scores + ": group must be 'a' or 'b', got '" + g + "'");
  }
  PermutationMode mode;
  if (o.mode == "montecarlo") mode = PermutationMode::MonteCarlo;
  else if (o.mode == "exhaustive") mode = PermutationMode::Exhaustive;
  else throw std::domain_error("--mode must be 'montecarlo' or 'exhaustive'");
  print(out, decision_json(permutation_test(data, o.n_perms, mode, o.test_seed, o.alpha)));
  return 0;
}

int cmd_test_outlier(const Options& o, std::ostream& out) {
  const OutlierTable cal = read_outlier_file(o.cal);
  std::vector<double> tests;
  std::vector<double> cal_scores = cal.scores;
  std::vector<double> synth_scores;
  const std::optional<OutlierTable> synth =
      o.synth.empty() ? std::nullopt : std::optional(read_outlier_file(o.synth));
  if (o.test_score) {
    if (cal.scores.empty()) throw IngestionError(o.cal + ": --score needs a score column");
    tests.push_back(*o.test_score);
  } else if (!o.test_file.empty()) {
    const OutlierTable test = read_outlier_file(o.test_file);
    if (!cal.scores.empty() && !test.scores.empty()) {
      tests = test.scores;
    } else if (!cal.features.empty() && !test.features.empty()) {
      cal_scores = centroid_scores(cal.features, cal.features);
      tests = centroid_scores(cal.features, test.features);
      if (synth) {
        if (synth->features.empty()) throw IngestionError(o.synth + ": expected feature columns");
        synth_scores = centroid_scores(cal.features, synth->features);
      }
    } else {
      throw IngestionError("calibration and test files must both carry scores or both features");
    }
  } else {
    throw std::domain_error("outlier test needs --score or --test");
  }
  if (synth && synth_scores.empty()) {
    if (synth->scores.empty()) throw IngestionError(o.synth + ": expected a score column");
    synth_scores = synth->scores;
  }

  GespiConfig cfg{o.alpha, o.epsilon, variant_from(o.variant), 0};
  cfg.validate();
  std::vector<double> pooled = cal_scores;
  pooled.insert(pooled.end(), synth_scores.begin(), synth_scores.end());
  ordered_json rows = ordered_json::array();
  for (double s : tests) {
    const TestDecision base = outlier_test(cal_scores, s, o.alpha);
    ordered_json row;
    row["score"] = s;
    row["pvalue"] = *base.pvalue;
    row["decision"] = base.decision.value();
    if (synth) {
      const auto g = combine(cfg.variant, base.decision, outlier_test(pooled, s, o.alpha).decision,
                             outlier_test(cal_scores, s, o.alpha + o.epsilon).decision);
      row["gespi_decision"] = g.action.value();
    }
    rows.push_back(std::move(row));
  }
  print(out, rows);
  return 0;
}

int cmd_mt(const Options& o, std::ostream& out) {
  FwerRule rule;
  if (o.rule == "hochberg") rule.kind = FwerRule::Kind::Hochberg;
  else if (o.rule == "bonferroni") rule = {FwerRule::Kind::BonferroniKFwer, o.k};
  else throw std::domain_error("--rule must be 'hochberg' or 'bonferroni'");
  const PValueVector real = read_pvalues_file(o.pvalues);
  ordered_json j;
  j["rejected"] = members_json(rule.apply(real, o.alpha));
  if (!o.pooled.empty()) {
    const PValueVector pooled = read_pvalues_file(o.pooled);
    j["gespi_rejected"] = members_json(gespi_multiple(real, pooled, real, o.alpha, o.epsilon, rule));
  }
  print(out, j);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GESPI: inference with synthetic data under a guardrail", "gespi"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo experiment");
  sim->add_option("task", o.task,
                  "binomial | winrate | outlier | outlier_fwer | conformal | crc | two_sample")
      ->required();
  sim->add_option("--config", o.config, "JSON experiment configuration")->check(CLI::ExistingFile);
  sim->add_option("--output,-o", o.output, "Output path ('-' for stdout)");
  sim->add_option("--format", o.format, "csv | json");
  sim->add_option("--seed", o.seed, "Master seed (overrides the config)");
  sim->add_option("--workers", o.workers, "Worker threads (default: $GESPI_WORKERS or 1)")
      ->check(CLI::PositiveNumber);

  auto add_levels = [&](CLI::App* c) {
    c->add_option("--alpha", o.alpha, "Level");
    c->add_option("--epsilon", o.epsilon, "Guardrail slack");
    c->add_option("--variant", o.variant, "two_sided | one_sided");
  };

  auto* conf = app.add_subcommand("conformal", "GESPI split-conformal threshold");
  conf->add_option("--real", o.real, "Real calibration scores (CSV: value)")->required();
  conf->add_option("--synth", o.synth, "Synthetic calibration scores (CSV: value)");
  add_levels(conf);

  auto* crc = app.add_subcommand("crc", "GESPI conformal risk control");
  crc->add_option("--real", o.real, "Real risk grid (CSV: point_id,lambda,loss)")->required();
  crc->add_option("--synth", o.synth, "Synthetic risk grid");
  crc->add_option("--bound", o.bound, "Loss bound B");
  crc->add_option("--monotonicity", o.monotonicity, "nonincreasing | nondecreasing");
  add_levels(crc);

  auto* test = app.add_subcommand("test", "Single-hypothesis tests");
  test->require_subcommand(1);
  auto* sign = test->add_subcommand("sign", "Sign test for a nonpositive median");
  sign->add_option("--scores", o.scores, "Observations (CSV: value)");
  sign->add_option("--successes", o.successes, "Number of positive observations");
  sign->add_option("--trials", o.trials, "Number of observations");
  sign->add_option("--alpha", o.alpha, "Level");
  auto* win = test->add_subcommand("winrate", "Randomized win-rate test");
  win->add_option("--wins", o.wins);
  win->add_option("--ties", o.ties);
  win->add_option("--losses", o.losses);
  win->add_option("--records", o.records, "Records (CSV: item_id,model_a_correct,model_b_correct,source)");
  win->add_option("--seed", o.test_seed, "Seed of the randomization draw");
  add_levels(win);
  auto* perm = test->add_subcommand("permutation", "Two-sample permutation test");
  perm->add_option("--scores", o.scores, "Scores (CSV: value,group with group a or b)")->required();
  perm->add_option("--perms", o.n_perms, "Monte-Carlo permutations");
  perm->add_option("--mode", o.mode, "montecarlo | exhaustive");
  perm->add_option("--seed", o.test_seed, "Permutation seed");
  perm->add_option("--alpha", o.alpha, "Level");
  auto* outl = test->add_subcommand("outlier", "Conformal outlier test");
  outl->add_option("--cal", o.cal, "Clean calibration data (CSV: score or features)")->required();
  outl->add_option("--test", o.test_file, "Test points (CSV: score or features)");
  outl->add_option("--score", o.test_score, "Single test score");
  outl->add_option("--synth", o.synth, "Synthetic calibration data; enables the GESPI decision");
  add_levels(outl);

  auto* mt = app.add_subcommand("mt", "FWER control over p-values");
  mt->add_option("--pvalues", o.pvalues, "Real p-values (CSV: hypothesis_id,pvalue)")->required();
  mt->add_option("--pooled", o.pooled, "Pooled p-values; enables the GESPI rejection set");
  mt->add_option("--rule", o.rule, "hochberg | bonferroni");
  mt->add_option("--k", o.k, "k for the k-FWER Bonferroni rule");
  mt->add_option("--alpha", o.alpha, "Level");
  mt->add_option("--epsilon", o.epsilon, "Guardrail slack");

  auto* oracle = app.add_subcommand("oracle", "Exact and Monte-Carlo oracles");
  oracle->require_subcommand(1);
  auto* tv = oracle->add_subcommand("tv-binomial", "TV distance between two binomials");
  auto* pin = oracle->add_subcommand("pinsker", "Pinsker-type bound for the median test");
  for (auto* c : {tv, pin}) {
    c->add_option("--n", o.n)->required();
    c->add_option("--p", o.p)->required();
    c->add_option("--q", o.q)->required();
  }
  auto* efd = oracle->add_subcommand("epsilon-from-delta", "Guardrail slack from a level delta");
  efd->add_option("--n", o.n)->required();
  efd->add_option("--N", o.N)->required();
  efd->add_option("--alpha", o.alpha)->required();
  efd->add_option("--delta", o.delta)->required();
  auto* rank = oracle->add_subcommand("rank-distribution",
                                      "Simulated vs exact rank law of a real order statistic");
  rank->add_option("--n", o.n)->required();
  rank->add_option("--N", o.N)->required();
  rank->add_option("--r", o.r)->required();
  rank->add_option("--trials", o.oracle_trials);
  rank->add_option("--seed", o.oracle_seed);
  rank->add_option("--workers", o.workers)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code;
  }

  try {
    if (*sim) return cmd_simulate(o, err);
    if (*conf) return cmd_conformal(o, out);
    if (*crc) return cmd_crc(o, out);
    if (*sign) return cmd_test_sign(o, out);
    if (*win) return cmd_test_winrate(o, out);
    if (*perm) return cmd_test_permutation(o, out);
    if (*outl) return cmd_test_outlier(o, out);
    if (*mt) return cmd_mt(o, out);
    if (*tv) {
      out << format_number(tv_binomial(o.n, o.p, o.q)) << '\n';
      return 0;
    }
    if (*pin) {
      out << format_number(pinsker_bound(o.n, o.p, o.q)) << '\n';
      return 0;
    }
    if (*efd) {
      out << format_number(epsilon_from_delta(o.n, o.N, o.alpha, o.delta).epsilon) << '\n';
      return 0;
    }
    if (*rank) {
      const unsigned workers = o.workers ? *o.workers : default_workers();
      const auto empirical =
          rank_distribution_oracle(o.n, o.N, o.r, o.oracle_trials, o.oracle_seed, workers);
      const auto exact = rank_pmf_exact(o.n, o.N, o.r);
      out << "rank,empirical,exact\n";
      for (std::size_t k = 0; k < exact.size(); ++k) {
        out << k + 1 << ',' << format_number(empirical[k]) << ',' << format_number(exact[k]) << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace gespi
