#include "gespi/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>

#include "gespi/conformal.hpp"
#include "gespi/hypothesis_tests.hpp"
#include "gespi/multiple_testing.hpp"
#include "gespi/numerics.hpp"
#include "gespi/parallel.hpp"

namespace gespi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void field_error(const std::string& field, const std::string& bound) {
  throw std::domain_error("field '" + field + "' must be " + bound);
}

void require_unit_interval(double x, const std::string& field) {
  if (!(x >= 0.0 && x <= 1.0)) field_error(field, "in [0, 1]");
}

void require_positive_count(std::size_t x, const std::string& field) {
  if (x == 0) field_error(field, ">= 1");
}

std::size_t to_count(double value, const std::string& field) {
  if (!(value >= 0.0) || value != std::floor(value) || value > 1e12) {
    field_error(field, "a nonnegative integer");
  }
  return static_cast<std::size_t>(value);
}

std::size_t rounded_count(double rate, std::size_t total) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(total)));
}

// ---------------------------------------------------------------------------
// Parameters addressable by sweeps.

struct Param {
  const char* name;
  double (*get)(const ExperimentSpec&);
  void (*set)(ExperimentSpec&, double);
};

const std::vector<Param>& all_params() {
  static const std::vector<Param> params = {
      {"alpha", [](const ExperimentSpec& s) { return s.alpha; },
       [](ExperimentSpec& s, double v) { s.alpha = v; }},
      {"epsilon", [](const ExperimentSpec& s) { return s.epsilon; },
       [](ExperimentSpec& s, double v) { s.epsilon = v; }},
      {"n", [](const ExperimentSpec& s) { return static_cast<double>(s.n); },
       [](ExperimentSpec& s, double v) { s.n = to_count(v, "n"); }},
      {"N", [](const ExperimentSpec& s) { return static_cast<double>(s.N); },
       [](ExperimentSpec& s, double v) { s.N = to_count(v, "N"); }},
      {"rho", [](const ExperimentSpec& s) { return s.rho; },
       [](ExperimentSpec& s, double v) { s.rho = v; }},
      {"rho_synt", [](const ExperimentSpec& s) { return s.rho_synt; },
       [](ExperimentSpec& s, double v) { s.rho_synt = v; }},
      {"contamination_rate",
       [](const ExperimentSpec& s) { return s.contamination.contamination_rate; },
       [](ExperimentSpec& s, double v) { s.contamination.contamination_rate = v; }},
      {"trim_rate", [](const ExperimentSpec& s) { return s.contamination.trim_rate; },
       [](ExperimentSpec& s, double v) { s.contamination.trim_rate = v; }},
      {"outlier_shift", [](const ExperimentSpec& s) { return s.contamination.outlier_shift; },
       [](ExperimentSpec& s, double v) { s.contamination.outlier_shift = v; }},
      {"synth_shift", [](const ExperimentSpec& s) { return s.conformal.synth.mean; },
       [](ExperimentSpec& s, double v) { s.conformal.synth.mean = v; }},
      {"synth_sd", [](const ExperimentSpec& s) { return s.conformal.synth.sd; },
       [](ExperimentSpec& s, double v) { s.conformal.synth.sd = v; }},
      {"proxy_bias", [](const ExperimentSpec& s) { return s.risk.proxy_bias; },
       [](ExperimentSpec& s, double v) { s.risk.proxy_bias = v; }},
      {"proxy_noise", [](const ExperimentSpec& s) { return s.risk.proxy_noise; },
       [](ExperimentSpec& s, double v) { s.risk.proxy_noise = v; }},
      {"p_win", [](const ExperimentSpec& s) { return s.winrate.p_win; },
       [](ExperimentSpec& s, double v) { s.winrate.p_win = v; }},
      {"p_loss", [](const ExperimentSpec& s) { return s.winrate.p_loss; },
       [](ExperimentSpec& s, double v) { s.winrate.p_loss = v; }},
      {"p_win_synth", [](const ExperimentSpec& s) { return s.winrate.p_win_synth; },
       [](ExperimentSpec& s, double v) { s.winrate.p_win_synth = v; }},
      {"p_loss_synth", [](const ExperimentSpec& s) { return s.winrate.p_loss_synth; },
       [](ExperimentSpec& s, double v) { s.winrate.p_loss_synth = v; }},
      {"effect", [](const ExperimentSpec& s) { return s.two_sample.effect; },
       [](ExperimentSpec& s, double v) { s.two_sample.effect = v; }},
      {"effect_synth", [](const ExperimentSpec& s) { return s.two_sample.effect_synth; },
       [](ExperimentSpec& s, double v) { s.two_sample.effect_synth = v; }},
  };
  return params;
}

const Param& find_param(const std::string& name) {
  for (const auto& p : all_params()) {
    if (name == p.name) return p;
  }
  throw std::domain_error("unknown sweep parameter '" + name + "'");
}

// ---------------------------------------------------------------------------
// Generic driver.

struct Cell {
  Method method;
  std::string metric;
  double value;
};

struct UnitResult {
  std::vector<Cell> cells;
  std::uint64_t violations = 0;
};

// Per-trial sums for a fixed list of (method, metric) cells.
class TrialAccumulator {
 public:
  std::size_t add_cell(Method method, std::string metric) {
    cells_.push_back({method, std::move(metric), 0.0});
    return cells_.size() - 1;
  }
  void add(std::size_t cell, double value) { cells_[cell].value += value; }

  UnitResult finish(std::size_t trials, std::uint64_t violations) {
    for (auto& c : cells_) c.value /= static_cast<double>(trials);
    return {std::move(cells_), violations};
  }

 private:
  std::vector<Cell> cells_;
};

using Kernel = UnitResult (*)(const ExperimentSpec& spec, std::size_t sweep_index,
                              std::size_t rep);

std::vector<double> sweep_values(const ExperimentSpec& spec) {
  if (!spec.sweep.values.empty()) return spec.sweep.values;
  return {find_param(spec.sweep.param).get(spec)};
}

MetricsTable drive(const ExperimentSpec& spec, unsigned workers, Kernel kernel) {
  spec.validate();
  const auto values = sweep_values(spec);
  std::vector<ExperimentSpec> specs;
  specs.reserve(values.size());
  for (double v : values) {
    specs.push_back(with_parameter(spec, spec.sweep.param, v));
    specs.back().validate();
  }

  const std::size_t reps = spec.outer_reps;
  std::vector<UnitResult> units(values.size() * reps);
  parallel_for(units.size(), workers, [&](std::size_t u) {
    const std::size_t s = u / reps;
    units[u] = kernel(specs[s], s, u % reps);
  });

  const std::vector<Method> methods =
      spec.methods.empty() ? supported_methods(spec.task) : spec.methods;

  MetricsTable table;
  for (std::size_t s = 0; s < values.size(); ++s) {
    const auto& first = units[s * reps].cells;
    for (Method method : methods) {
      for (std::size_t c = 0; c < first.size(); ++c) {
        if (first[c].method != method) continue;
        std::vector<double> xs(reps);
        for (std::size_t r = 0; r < reps; ++r) xs[r] = units[s * reps + r].cells[c].value;
        MetricsRow row;
        row.sweep_param = spec.sweep.param;
        row.sweep_value = values[s];
        row.method = to_string(method);
        row.metric = first[c].metric;
        row.inner_trials = spec.inner_trials;
        row.outer_reps = reps;
        row.seed = spec.seed;
        const double sum = std::accumulate(xs.begin(), xs.end(), 0.0);
        row.mean = sum / static_cast<double>(reps);
        if (std::isfinite(row.mean)) {
          double ss = 0.0;
          for (double x : xs) ss += (x - row.mean) * (x - row.mean);
          row.std = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
        } else {
          row.std = kInf;
        }
        table.rows.push_back(std::move(row));
      }
    }
  }
  for (const auto& u : units) table.sandwich_violations += u.violations;
  return table;
}

template <class Action>
bool sandwich_holds(const GespiOutput<Action>& out) {
  return leq(out.base_action, out.action) && leq(out.action, out.guardrail_action);
}

GuardrailVariant gespi_variant(const ExperimentSpec& spec) { return spec.variant; }

// ---------------------------------------------------------------------------
// Samplers.

std::vector<double> cumulative(const std::vector<double>& pmf) {
  std::vector<double> cdf(pmf.size());
  std::partial_sum(pmf.begin(), pmf.end(), cdf.begin());
  cdf.back() = 1.0;
  return cdf;
}

std::uint64_t draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<std::uint64_t>(
      std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

// ---------------------------------------------------------------------------
// Binomial test.

UnitResult binomial_kernel(const ExperimentSpec& spec, std::size_t s, std::size_t rep) {
  const auto real_cdf = cumulative(binomial_pmf(spec.n, spec.rho));
  const auto synth_cdf = cumulative(binomial_pmf(spec.N, spec.rho_synt));
  const RandomizedBinomialTest real_test(spec.n, 0.5, spec.alpha);
  const RandomizedBinomialTest guard_test(spec.n, 0.5, spec.alpha + spec.epsilon);
  const RandomizedBinomialTest synth_test(spec.N, 0.5, spec.alpha);
  const RandomizedBinomialTest pooled_test(spec.n + spec.N, 0.5, spec.alpha);

  const std::string metric = spec.rho <= 0.5 ? "type_i_error" : "power";
  TrialAccumulator acc;
  const auto c_real = acc.add_cell(Method::OnlyReal, metric);
  const auto c_synth = acc.add_cell(Method::OnlySynth, metric);
  const auto c_gespi = acc.add_cell(Method::Gespi, metric);
  const auto c_one = acc.add_cell(Method::GespiOneSided, metric);

  std::uint64_t violations = 0;
  for (std::size_t t = 0; t < spec.inner_trials; ++t) {
    Rng rng = make_rng(spec.seed, {s, rep, t});
    const std::uint64_t w = draw_from_cdf(real_cdf, rng);
    const std::uint64_t w_synth = draw_from_cdf(synth_cdf, rng);
    const double u_real = uniform01(rng);
    const double u_pooled = uniform01(rng);
    const double u_synth = uniform01(rng);

    const BinaryDecision base = real_test.decide(w, u_real).decision;
    const BinaryDecision guard = guard_test.decide(w, u_real).decision;
    const BinaryDecision pooled = pooled_test.decide(w + w_synth, u_pooled).decision;
    const auto two = combine(gespi_variant(spec), base, pooled, guard);
    const auto one = combine(GuardrailVariant::OneSided, base, pooled, guard);
    if (spec.variant == GuardrailVariant::TwoSided && !sandwich_holds(two)) ++violations;

    acc.add(c_real, base.value());
    acc.add(c_synth, synth_test.decide(w_synth, u_synth).decision.value());
    acc.add(c_gespi, two.action.value());
    acc.add(c_one, one.action.value());
  }
  return acc.finish(spec.inner_trials, violations);
}

// ---------------------------------------------------------------------------
// Outlier detection.

struct LabeledScores {
  std::vector<double> scores;
  std::vector<char> outlier;
};

class GaussianScene {
 public:
  GaussianScene(const ContaminationSpec& c, Rng& rng) : c_(c), centroid_(c.dimension, 0.0) {
    const std::size_t bad = rounded_count(c.contamination_rate, c.training_size);
    std::vector<double> x(c.dimension);
    for (std::size_t i = 0; i < c.training_size; ++i) {
      draw(rng, i < bad, x);
      for (std::size_t d = 0; d < c.dimension; ++d) centroid_[d] += x[d];
    }
    for (double& v : centroid_) v /= static_cast<double>(c.training_size);
  }

  // `outliers` of the `total` points are outliers, listed first.
  LabeledScores sample(Rng& rng, std::size_t total, std::size_t outliers) const {
    LabeledScores out;
    out.scores.resize(total);
    out.outlier.resize(total);
    std::vector<double> x(c_.dimension);
    for (std::size_t i = 0; i < total; ++i) {
      const bool bad = i < outliers;
      draw(rng, bad, x);
      double ss = 0.0;
      for (std::size_t d = 0; d < c_.dimension; ++d) {
        ss += (x[d] - centroid_[d]) * (x[d] - centroid_[d]);
      }
      out.scores[i] = std::sqrt(ss);
      out.outlier[i] = bad ? 1 : 0;
    }
    return out;
  }

 private:
  void draw(Rng& rng, bool outlier, std::vector<double>& x) const {
    const double shift =
        outlier ? c_.outlier_shift / std::sqrt(static_cast<double>(c_.dimension)) : 0.0;
    for (double& v : x) v = normal(rng) + shift;
  }

  ContaminationSpec c_;
  std::vector<double> centroid_;
};

struct OutlierCalibrations {
  std::vector<double> real;
  std::vector<double> synth;
  std::vector<double> pooled;
  std::vector<double> oracle;
};

OutlierCalibrations outlier_calibrations(const ExperimentSpec& spec, const GaussianScene& scene,
                                         Rng& rng) {
  const auto& c = spec.contamination;
  OutlierCalibrations cal;
  cal.real = scene.sample(rng, spec.n, 0).scores;
  const LabeledScores pool =
      scene.sample(rng, spec.N, rounded_count(c.contamination_rate, spec.N));

  cal.oracle = cal.real;
  for (std::size_t i = 0; i < pool.scores.size(); ++i) {
    if (!pool.outlier[i]) cal.oracle.push_back(pool.scores[i]);
  }
  // Trim the highest-scoring fraction of the pool.
  std::vector<double> sorted = pool.scores;
  std::sort(sorted.begin(), sorted.end());
  const auto trimmed = static_cast<std::size_t>(
      std::floor(c.trim_rate * static_cast<double>(spec.N) + 1e-9));
  sorted.resize(sorted.size() - std::min(trimmed, sorted.size()));
  cal.synth = std::move(sorted);
  cal.pooled = cal.real;
  cal.pooled.insert(cal.pooled.end(), cal.synth.begin(), cal.synth.end());
  return cal;
}

std::vector<double> pvalues_or_ones(const std::vector<double>& cal,
                                    const std::vector<double>& tests) {
  if (cal.empty()) return std::vector<double>(tests.size(), 1.0);
  return conformal_pvalues(cal, tests);
}

UnitResult outlier_single_kernel(const ExperimentSpec& spec, std::size_t s, std::size_t rep) {
  const auto& c = spec.contamination;
  TrialAccumulator acc;
  struct Cells { std::size_t type1, power; };
  auto cells_for = [&](Method m) {
    const auto t1 = acc.add_cell(m, "type_i_error");
    return Cells{t1, acc.add_cell(m, "power")};
  };
  const Cells real_c = cells_for(Method::OnlyReal);
  const Cells synth_c = cells_for(Method::OnlySynth);
  const Cells gespi_c = cells_for(Method::Gespi);
  const Cells oracle_c = cells_for(Method::Oracle);

  std::uint64_t violations = 0;
  const double total_in = static_cast<double>(c.test_inliers);
  const double total_out = static_cast<double>(c.test_outliers);
  for (std::size_t t = 0; t < spec.inner_trials; ++t) {
    Rng rng = make_rng(spec.seed, {s, rep, t});
    const GaussianScene scene(c, rng);
    const auto cal = outlier_calibrations(spec, scene, rng);
    const LabeledScores test = scene.sample(rng, c.test_inliers + c.test_outliers, c.test_outliers);

    const auto p_real = pvalues_or_ones(cal.real, test.scores);
    const auto p_synth = pvalues_or_ones(cal.synth, test.scores);
    const auto p_pooled = pvalues_or_ones(cal.pooled, test.scores);
    const auto p_oracle = pvalues_or_ones(cal.oracle, test.scores);

    std::array<double, 4> false_rej{};
    std::array<double, 4> true_rej{};
    for (std::size_t i = 0; i < test.scores.size(); ++i) {
      const BinaryDecision base(p_real[i] <= spec.alpha);
      const BinaryDecision guard(p_real[i] <= spec.alpha + spec.epsilon);
      const BinaryDecision pooled(p_pooled[i] <= spec.alpha);
      const auto g = combine(gespi_variant(spec), base, pooled, guard);
      if (spec.variant == GuardrailVariant::TwoSided && !sandwich_holds(g)) ++violations;
      const std::array<bool, 4> rejects = {base.rejects(), p_synth[i] <= spec.alpha,
                                           g.action.rejects(), p_oracle[i] <= spec.alpha};
      auto& tally = test.outlier[i] ? true_rej : false_rej;
      for (std::size_t m = 0; m < 4; ++m) tally[m] += rejects[m] ? 1.0 : 0.0;
    }
    const std::array<Cells, 4> all = {real_c, synth_c, gespi_c, oracle_c};
    for (std::size_t m = 0; m < 4; ++m) {
      acc.add(all[m].type1, total_in > 0 ? false_rej[m] / total_in : 0.0);
      acc.add(all[m].power, total_out > 0 ? true_rej[m] / total_out : 0.0);
    }
  }
  return acc.finish(spec.inner_trials, violations);
}

UnitResult outlier_fwer_kernel(const ExperimentSpec& spec, std::size_t s, std::size_t rep) {
  const auto& c = spec.contamination;
  TrialAccumulator acc;
  struct Cells { std::size_t fwer, power; };
  auto cells_for = [&](Method m) {
    const auto f = acc.add_cell(m, "fwer");
    return Cells{f, acc.add_cell(m, "power")};
  };
  const std::array<Cells, 4> all = {cells_for(Method::OnlyReal), cells_for(Method::OnlySynth),
                                    cells_for(Method::Gespi), cells_for(Method::Oracle)};
  const FwerRule rule{};

  std::uint64_t violations = 0;
  for (std::size_t t = 0; t < spec.inner_trials; ++t) {
    Rng rng = make_rng(spec.seed, {s, rep, t});
    const GaussianScene scene(c, rng);
    const auto cal = outlier_calibrations(spec, scene, rng);
    const LabeledScores test = scene.sample(rng, c.test_inliers + c.test_outliers, c.test_outliers);

    std::vector<std::size_t> order(test.scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::array<double, 4> batches_with_false{};
    std::array<double, 4> detected{};
    const std::size_t total = order.size();
    for (std::size_t b = 0; b < c.batch_count; ++b) {
      const std::size_t begin = b * total / c.batch_count;
      const std::size_t end = (b + 1) * total / c.batch_count;
      if (begin == end) continue;
      std::vector<double> scores;
      std::vector<char> labels;
      for (std::size_t i = begin; i < end; ++i) {
        scores.push_back(test.scores[order[i]]);
        labels.push_back(test.outlier[order[i]]);
      }
      const PValueVector pv_real(pvalues_or_ones(cal.real, scores));
      const PValueVector pv_pooled(pvalues_or_ones(cal.pooled, scores));
      const RejectionSet base = rule.apply(pv_real, spec.alpha);
      const RejectionSet guard = rule.apply(pv_real, spec.alpha + spec.epsilon);
      const RejectionSet pooled = rule.apply(pv_pooled, spec.alpha);
      const auto g = combine(gespi_variant(spec), base, pooled, guard);
      if (spec.variant == GuardrailVariant::TwoSided && !sandwich_holds(g)) ++violations;

      const std::array<RejectionSet, 4> sets = {
          base, rule.apply(PValueVector(pvalues_or_ones(cal.synth, scores)), spec.alpha),
          g.action, rule.apply(PValueVector(pvalues_or_ones(cal.oracle, scores)), spec.alpha)};
      for (std::size_t m = 0; m < 4; ++m) {
        bool any_false = false;
        for (std::size_t j : sets[m].members()) {
          if (labels[j - 1]) detected[m] += 1.0; else any_false = true;
        }
        batches_with_false[m] += any_false ? 1.0 : 0.0;
      }
    }
    for (std::size_t m = 0; m < 4; ++m) {
      acc.add(all[m].fwer, batches_with_false[m] / static_cast<double>(c.batch_count));
      acc.add(all[m].power, c.test_outliers > 0
                                ? detected[m] / static_cast<double>(c.test_outliers)
                                : 0.0);
    }
  }
  return acc.finish(spec.inner_trials, violations);
}

// ---------------------------------------------------------------------------
// Split conformal.

UnitResult conformal_kernel(const ExperimentSpec& spec, std::size_t s, std::size_t rep) {
  const auto& c = spec.conformal;
  TrialAccumulator acc;
  const std::array<Method, 5> methods = {Method::OnlyReal, Method::OnlySynth, Method::Gespi,
                                         Method::GespiOneSided, Method::Oracle};
  std::array<std::size_t, 5> cov{};
  std::array<std::size_t, 5> thr{};
  for (std::size_t m = 0; m < methods.size(); ++m) {
    cov[m] = acc.add_cell(methods[m], "coverage");
    thr[m] = acc.add_cell(methods[m], "threshold");
  }

  std::uint64_t violations = 0;
  std::vector<double> real(spec.n);
  std::vector<double> synth(spec.N);
  std::vector<double> oracle(spec.n + spec.N);
  for (std::size_t t = 0; t < spec.inner_trials; ++t) {
    Rng rng = make_rng(spec.seed, {s, rep, t});
    for (double& x : real) x = c.real.draw(rng);
    for (double& x : synth) x = c.synth.draw(rng);
    const double test = c.real.draw(rng);
    std::copy(real.begin(), real.end(), oracle.begin());
    for (std::size_t i = spec.n; i < oracle.size(); ++i) oracle[i] = c.real.draw(rng);

    std::vector<double> pooled(real);
    pooled.insert(pooled.end(), synth.begin(), synth.end());
    const ThresholdAction base = conformal_quantile(real, spec.alpha);
    const ThresholdAction guard = conformal_quantile(real, spec.alpha + spec.epsilon);
    const ThresholdAction pool = conformal_quantile(pooled, spec.alpha);
    const auto two = combine(gespi_variant(spec), base, pool, guard);
    const auto one = combine(GuardrailVariant::OneSided, base, pool, guard);
    if (spec.variant == GuardrailVariant::TwoSided && !sandwich_holds(two)) ++violations;

    const std::array<ThresholdAction, 5> actions = {
        base,
        synth.empty() ? ThresholdAction(kInf, Direction::LargerIsMoreConservative)
                      : conformal_quantile(synth, spec.alpha),
        two.action, one.action, conformal_quantile(oracle, spec.alpha)};
    for (std::size_t m = 0; m < actions.size(); ++m) {
      acc.add(cov[m], coverage_indicator(actions[m], test) ? 1.0 : 0.0);
      acc.add(thr[m], actions[m].threshold());
    }
  }
  return acc.finish(spec.inner_trials, violations);
}

// ---------------------------------------------------------------------------
// Risk control.

struct Item {
  std::vector<double> confidence;
  std::vector<double> error;
};

Item draw_item(const RiskControlSpec& r, Rng& rng) {
  Item item;
  item.confidence.resize(r.residues);
  item.error.resize(r.residues);
  const double difficulty = normal(rng);
  for (std::size_t i = 0; i < r.residues; ++i) {
    const double c = 100.0 * uniform01(rng);
    item.confidence[i] = c;
    item.error[i] = 6.0 * (1.0 - c / 100.0) + 0.8 * difficulty + normal(rng);
  }
  return item;
}

std::vector<double> lambda_grid(const RiskControlSpec& r) {
  std::vector<double> grid;
  const auto steps = static_cast<std::size_t>(std::ceil(100.0 / r.lambda_step - 1e-9));
  for (std::size_t j = 0; j < steps; ++j) grid.push_back(static_cast<double>(j) * r.lambda_step);
  grid.push_back(100.0);
  return grid;
}

double item_loss(const Item& item, double cutoff, double lambda) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < item.error.size(); ++i) {
    if (item.error[i] > cutoff && item.confidence[i] >= lambda) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(item.error.size());
}

double item_abstention(const Item& item, double lambda) {
  const auto n = std::count_if(item.confidence.begin(), item.confidence.end(),
                               [&](double c) { return c < lambda; });
  return static_cast<double>(n) / static_cast<double>(item.confidence.size());
}

void append_loss_row(const Item& item, double cutoff, const std::vector<double>& grid,
                     std::vector<double>& losses) {
  std::vector<double> bad;
  for (std::size_t i = 0; i < item.error.size(); ++i) {
    if (item.error[i] > cutoff) bad.push_back(item.confidence[i]);
  }
  std::sort(bad.begin(), bad.end());
  const double total = static_cast<double>(item.error.size());
  for (double lambda : grid) {
    const auto kept = bad.end() - std::lower_bound(bad.begin(), bad.end(), lambda);
    losses.push_back(static_cast<double>(kept) / total);
  }
}

UnitResult crc_kernel(const ExperimentSpec& spec, std::size_t s, std::size_t rep) {
  const auto& r = spec.risk;
  const auto grid = lambda_grid(r);
  TrialAccumulator acc;
  const std::array<Method, 3> methods = {Method::OnlyReal, Method::OnlySynth, Method::Gespi};
  std::array<std::size_t, 3> risk{};
  std::array<std::size_t, 3> abst{};
  std::array<std::size_t, 3> lam{};
  for (std::size_t m = 0; m < methods.size(); ++m) {
    risk[m] = acc.add_cell(methods[m], "risk");
    abst[m] = acc.add_cell(methods[m], "abstention_rate");
    lam[m] = acc.add_cell(methods[m], "lambda");
  }
  GespiConfig cfg{spec.alpha, spec.epsilon, spec.variant, 0};

  std::uint64_t violations = 0;
  for (std::size_t t = 0; t < spec.inner_trials; ++t) {
    Rng rng = make_rng(spec.seed, {s, rep, t});
    std::vector<double> real_losses;
    for (std::size_t i = 0; i < spec.n; ++i) {
      append_loss_row(draw_item(r, rng), r.error_cutoff, grid, real_losses);
    }
    std::vector<double> synth_losses;
    for (std::size_t i = 0; i < spec.N; ++i) {
      Item item = draw_item(r, rng);
      if (r.zero_loss_proxy) {
        synth_losses.insert(synth_losses.end(), grid.size(), 0.0);
        continue;
      }
      for (double& e : item.error) e += r.proxy_bias + r.proxy_noise * normal(rng);
      append_loss_row(item, r.error_cutoff, grid, synth_losses);
    }
    std::vector<Item> tests;
    for (std::size_t i = 0; i < r.test_items; ++i) tests.push_back(draw_item(r, rng));

    const RiskGrid real_grid(grid, std::move(real_losses), 1.0);
    const RiskGrid synth_grid(grid, std::move(synth_losses), 1.0);
    const RiskGrid pooled_grid = real_grid.concat(synth_grid);
    const ThresholdAction base = crc_lambda(real_grid, spec.alpha);
    const ThresholdAction guard = crc_lambda(real_grid, spec.alpha + spec.epsilon);
    const ThresholdAction gespi = gespi_crc(real_grid, pooled_grid, cfg);
    if (spec.variant == GuardrailVariant::TwoSided &&
        !(leq(base, gespi) && leq(gespi, guard))) {
      ++violations;
    }
    const std::array<ThresholdAction, 3> actions = {
        base, synth_grid.points() > 0 ? crc_lambda(synth_grid, spec.alpha) : base, gespi};
    for (std::size_t m = 0; m < actions.size(); ++m) {
      const double lambda = actions[m].threshold();
      double loss = 0.0;
      double abstained = 0.0;
      for (const auto& item : tests) {
        loss += item_loss(item, r.error_cutoff, lambda);
        abstained += item_abstention(item, lambda);
      }
      acc.add(risk[m], loss / static_cast<double>(tests.size()));
      acc.add(abst[m], abstained / static_cast<double>(tests.size()));
      acc.add(lam[m], lambda);
    }
  }
  return acc.finish(spec.inner_trials, violations);
}

// ---------------------------------------------------------------------------
// Win rate.

TrinomialCounts tally(const std::vector<const WinRateRecord*>& records,
                      const std::vector<char>& swapped_flags,
                      const std::vector<std::size_t>& picks) {
  TrinomialCounts counts;
  for (std::size_t i : picks) {
    bool a = records[i]->model_a_correct;
    bool b = records[i]->model_b_correct;
    if (swapped_flags[i]) std::swap(a, b);
    if (a && !b) ++counts.wins;
    else if (b && !a) ++counts.losses;
    else ++counts.ties;
  }
  return counts;
}

std::vector<std::size_t> subsample(std::size_t population, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

struct WinRatePools {
  std::vector<const WinRateRecord*> real;
  std::vector<const WinRateRecord*> synth;
};

WinRatePools split_pools(const std::vector<WinRateRecord>& records) {
  WinRatePools pools;
  for (const auto& r : records) (r.synthetic ? pools.synth : pools.real).push_back(&r);
  return pools;
}

UnitResult winrate_kernel(const ExperimentSpec& spec, std::size_t s, std::size_t rep) {
  const std::vector<WinRateRecord> records =
      spec.winrate.records.empty()
          ? generate_winrate_records(spec.winrate, derive_seed(spec.seed, {s}))
          : spec.winrate.records;
  const WinRatePools pools = split_pools(records);
  if (pools.real.size() < spec.n) {
    throw std::domain_error("win-rate experiment needs n <= number of real records");
  }
  if (pools.synth.size() < spec.N) {
    throw std::domain_error("win-rate experiment needs N <= number of synthetic records");
  }

  // Shuffled mode swaps the two models' answers per item, once per outer rep.
  std::vector<char> swap_real(pools.real.size(), 0);
  std::vector<char> swap_synth(pools.synth.size(), 0);
  if (spec.winrate.shuffled) {
    Rng rng = make_rng(spec.seed, {s, rep});
    for (auto& f : swap_real) f = uniform01(rng) < 0.5;
    for (auto& f : swap_synth) f = uniform01(rng) < 0.5;
  }

  const std::string metric = spec.winrate.shuffled ? "type_i_error" : "power";
  TrialAccumulator acc;
  const auto c_real = acc.add_cell(Method::OnlyReal, metric);
  const auto c_synth = acc.add_cell(Method::OnlySynth, metric);
  const auto c_gespi = acc.add_cell(Method::Gespi, metric);
  const auto c_one = acc.add_cell(Method::GespiOneSided, metric);

  std::uint64_t violations = 0;
  for (std::size_t t = 0; t < spec.inner_trials; ++t) {
    Rng rng = make_rng(spec.seed, {s, rep, t});
    const TrinomialCounts real = tally(pools.real, swap_real, subsample(pools.real.size(), spec.n, rng));
    const TrinomialCounts synth =
        tally(pools.synth, swap_synth, subsample(pools.synth.size(), spec.N, rng));
    const TrinomialCounts pooled{real.wins + synth.wins, real.ties + synth.ties,
                                 real.losses + synth.losses};
    const double u_real = uniform01(rng);
    const double u_pooled = uniform01(rng);
    const double u_synth = uniform01(rng);

    const BinaryDecision base = winrate_test(real, spec.alpha, u_real).decision;
    const BinaryDecision guard = winrate_test(real, spec.alpha + spec.epsilon, u_real).decision;
    const BinaryDecision pool = winrate_test(pooled, spec.alpha, u_pooled).decision;
    const auto two = combine(gespi_variant(spec), base, pool, guard);
    const auto one = combine(GuardrailVariant::OneSided, base, pool, guard);
    if (spec.variant == GuardrailVariant::TwoSided && !sandwich_holds(two)) ++violations;

    acc.add(c_real, base.value());
    acc.add(c_synth, winrate_test(synth, spec.alpha, u_synth).decision.value());
    acc.add(c_gespi, two.action.value());
    acc.add(c_one, one.action.value());
  }
  return acc.finish(spec.inner_trials, violations);
}

// ---------------------------------------------------------------------------
// Two-sample permutation test.

UnitResult two_sample_kernel(const ExperimentSpec& spec, std::size_t s, std::size_t rep) {
  const auto& ts = spec.two_sample;
  const std::string metric = ts.effect == 0.0 ? "type_i_error" : "power";
  TrialAccumulator acc;
  const auto c_real = acc.add_cell(Method::OnlyReal, metric);
  const auto c_synth = acc.add_cell(Method::OnlySynth, metric);
  const auto c_gespi = acc.add_cell(Method::Gespi, metric);
  const auto c_one = acc.add_cell(Method::GespiOneSided, metric);

  std::uint64_t violations = 0;
  for (std::size_t t = 0; t < spec.inner_trials; ++t) {
    Rng rng = make_rng(spec.seed, {s, rep, t});
    TwoSampleData real;
    TwoSampleData synth;
    for (std::size_t i = 0; i < spec.n; ++i) real.group_a.push_back(ts.effect + normal(rng));
    for (std::size_t i = 0; i < spec.n; ++i) real.group_b.push_back(normal(rng));
    for (std::size_t i = 0; i < spec.N; ++i) synth.group_a.push_back(ts.effect_synth + normal(rng));
    for (std::size_t i = 0; i < spec.N; ++i) synth.group_b.push_back(normal(rng));
    TwoSampleData pooled = real;
    pooled.group_a.insert(pooled.group_a.end(), synth.group_a.begin(), synth.group_a.end());
    pooled.group_b.insert(pooled.group_b.end(), synth.group_b.begin(), synth.group_b.end());

    const std::uint64_t trial_seed = derive_seed(spec.seed, {s, rep, t, 1});
    const GespiStreams streams = gespi_streams(trial_seed);
    const double p_real = *permutation_test(real, ts.n_perms, PermutationMode::MonteCarlo,
                                            streams.real, spec.alpha).pvalue;
    const double p_pooled = *permutation_test(pooled, ts.n_perms, PermutationMode::MonteCarlo,
                                              streams.pooled, spec.alpha).pvalue;
    const double p_synth = *permutation_test(synth, ts.n_perms, PermutationMode::MonteCarlo,
                                             derive_seed(trial_seed, {2}), spec.alpha).pvalue;

    const BinaryDecision base(p_real <= spec.alpha);
    const BinaryDecision guard(p_real <= spec.alpha + spec.epsilon);
    const BinaryDecision pool(p_pooled <= spec.alpha);
    const auto two = combine(gespi_variant(spec), base, pool, guard);
    const auto one = combine(GuardrailVariant::OneSided, base, pool, guard);
    if (spec.variant == GuardrailVariant::TwoSided && !sandwich_holds(two)) ++violations;

    acc.add(c_real, base.value());
    acc.add(c_synth, p_synth <= spec.alpha ? 1.0 : 0.0);
    acc.add(c_gespi, two.action.value());
    acc.add(c_one, one.action.value());
  }
  return acc.finish(spec.inner_trials, violations);
}

void require_task(const ExperimentSpec& spec, std::initializer_list<Task> tasks) {
  if (std::find(tasks.begin(), tasks.end(), spec.task) == tasks.end()) {
    throw std::domain_error("experiment spec has task '" + to_string(spec.task) +
                            "', which this harness does not run");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Task task) {
  switch (task) {
    case Task::BinomialTest: return "binomial";
    case Task::WinRate: return "winrate";
    case Task::OutlierSingle: return "outlier";
    case Task::OutlierFWER: return "outlier_fwer";
    case Task::Conformal: return "conformal";
    case Task::RiskControl: return "crc";
    case Task::TwoSample: return "two_sample";
  }
  return "unknown";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::OnlyReal: return "OnlyReal";
    case Method::OnlySynth: return "OnlySynth";
    case Method::Gespi: return "Gespi";
    case Method::GespiOneSided: return "GespiOneSided";
    case Method::Oracle: return "Oracle";
  }
  return "unknown";
}

Task parse_task(const std::string& name) {
  for (Task t : {Task::BinomialTest, Task::WinRate, Task::OutlierSingle, Task::OutlierFWER,
                 Task::Conformal, Task::RiskControl, Task::TwoSample}) {
    if (to_string(t) == name) return t;
  }
  throw std::domain_error("unknown task '" + name +
                          "' (expected binomial, winrate, outlier, outlier_fwer, "
                          "conformal, crc or two_sample)");
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::OnlyReal, Method::OnlySynth, Method::Gespi, Method::GespiOneSided,
                   Method::Oracle}) {
    if (to_string(m) == name) return m;
  }
  throw std::domain_error("unknown method '" + name + "'");
}

double ScoreModel::draw(Rng& rng) const {
  if (discrete) return discrete->sample(rng);
  return mean + sd * normal(rng);
}

ExperimentSpec default_spec(Task task) {
  ExperimentSpec spec;
  spec.task = task;
  switch (task) {
    case Task::OutlierSingle:
      spec.n = 40;
      spec.alpha = 0.02;
      spec.epsilon = 0.01;
      break;
    case Task::OutlierFWER:
      spec.n = 100;
      spec.alpha = 0.15;
      spec.epsilon = 0.10;
      break;
    case Task::RiskControl:
      spec.n = 10;
      spec.N = 100;
      spec.alpha = 0.1;
      spec.epsilon = 0.05;
      break;
    case Task::WinRate:
      spec.n = 15;
      spec.N = 100;
      break;
    default:
      break;
  }
  spec.methods = supported_methods(task);
  return spec;
}

std::vector<Method> supported_methods(Task task) {
  switch (task) {
    case Task::OutlierSingle:
    case Task::OutlierFWER:
      return {Method::OnlyReal, Method::OnlySynth, Method::Gespi, Method::Oracle};
    case Task::Conformal:
      return {Method::OnlyReal, Method::OnlySynth, Method::Gespi, Method::GespiOneSided,
              Method::Oracle};
    case Task::RiskControl:
      return {Method::OnlyReal, Method::OnlySynth, Method::Gespi};
    default:
      return {Method::OnlyReal, Method::OnlySynth, Method::Gespi, Method::GespiOneSided};
  }
}

std::vector<std::string> sweep_parameters(Task task) {
  std::vector<std::string> names = {"alpha", "epsilon", "n", "N"};
  auto add = [&](std::initializer_list<const char*> extra) {
    names.insert(names.end(), extra.begin(), extra.end());
  };
  switch (task) {
    case Task::BinomialTest: add({"rho", "rho_synt"}); break;
    case Task::WinRate: add({"p_win", "p_loss", "p_win_synth", "p_loss_synth"}); break;
    case Task::OutlierSingle:
    case Task::OutlierFWER: add({"contamination_rate", "trim_rate", "outlier_shift"}); break;
    case Task::Conformal: add({"synth_shift", "synth_sd"}); break;
    case Task::RiskControl: add({"proxy_bias", "proxy_noise"}); break;
    case Task::TwoSample: add({"effect", "effect_synth"}); break;
  }
  return names;
}

ExperimentSpec with_parameter(ExperimentSpec spec, const std::string& param, double value) {
  find_param(param).set(spec, value);
  return spec;
}

void ExperimentSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) field_error("alpha", "in (0, 1)");
  if (!(epsilon >= 0.0)) field_error("epsilon", ">= 0");
  if (!(alpha + epsilon < 1.0)) field_error("epsilon", "below 1 - alpha");
  require_unit_interval(rho, "rho");
  require_unit_interval(rho_synt, "rho_synt");
  require_positive_count(n, "n");
  require_positive_count(inner_trials, "inner_trials");
  require_positive_count(outer_reps, "outer_reps");

  const auto allowed = sweep_parameters(task);
  if (std::find(allowed.begin(), allowed.end(), sweep.param) == allowed.end()) {
    field_error("sweep.param", "one of the parameters of task '" + to_string(task) + "'");
  }
  for (double v : sweep.values) {
    if (!std::isfinite(v)) field_error("sweep.values", "finite");
  }
  const auto supported = supported_methods(task);
  for (Method m : methods) {
    if (std::find(supported.begin(), supported.end(), m) == supported.end()) {
      field_error("methods", "supported by task '" + to_string(task) + "' (got " +
                                 to_string(m) + ")");
    }
  }

  switch (task) {
    case Task::OutlierSingle:
    case Task::OutlierFWER: {
      const auto& c = contamination;
      if (!(c.contamination_rate >= 0.0 && c.contamination_rate < 1.0)) {
        field_error("contamination.contamination_rate", "in [0, 1)");
      }
      if (!(c.trim_rate >= 0.0 && c.trim_rate < 1.0)) field_error("contamination.trim_rate", "in [0, 1)");
      if (!std::isfinite(c.outlier_shift)) field_error("contamination.outlier_shift", "finite");
      require_positive_count(c.dimension, "contamination.dimension");
      require_positive_count(c.training_size, "contamination.training_size");
      require_positive_count(c.test_inliers + c.test_outliers, "contamination.test_inliers");
      if (task == Task::OutlierFWER) require_positive_count(c.batch_count, "contamination.batch_count");
      break;
    }
    case Task::Conformal:
      for (const auto* m : {&conformal.real, &conformal.synth}) {
        if (!std::isfinite(m->mean)) field_error("conformal.mean", "finite");
        if (!(m->sd > 0.0 && std::isfinite(m->sd))) field_error("conformal.sd", "positive");
      }
      break;
    case Task::RiskControl:
      require_positive_count(risk.residues, "risk.residues");
      require_positive_count(risk.test_items, "risk.test_items");
      if (!(risk.lambda_step > 0.0 && risk.lambda_step <= 100.0)) {
        field_error("risk.lambda_step", "in (0, 100]");
      }
      if (!std::isfinite(risk.proxy_bias)) field_error("risk.proxy_bias", "finite");
      if (!(risk.proxy_noise >= 0.0 && std::isfinite(risk.proxy_noise))) {
        field_error("risk.proxy_noise", ">= 0");
      }
      break;
    case Task::WinRate:
      for (auto [p, name] : {std::pair{winrate.p_win, "winrate.p_win"},
                             std::pair{winrate.p_loss, "winrate.p_loss"},
                             std::pair{winrate.p_win_synth, "winrate.p_win_synth"},
                             std::pair{winrate.p_loss_synth, "winrate.p_loss_synth"}}) {
        require_unit_interval(p, name);
      }
      if (winrate.p_win + winrate.p_loss > 1.0) field_error("winrate.p_loss", "at most 1 - p_win");
      if (winrate.p_win_synth + winrate.p_loss_synth > 1.0) {
        field_error("winrate.p_loss_synth", "at most 1 - p_win_synth");
      }
      break;
    case Task::TwoSample:
      require_positive_count(N, "N");
      require_positive_count(two_sample.n_perms, "two_sample.n_perms");
      if (!std::isfinite(two_sample.effect)) field_error("two_sample.effect", "finite");
      if (!std::isfinite(two_sample.effect_synth)) field_error("two_sample.effect_synth", "finite");
      break;
    case Task::BinomialTest:
      break;
  }
}

const MetricsRow* MetricsTable::find(double sweep_value, const std::string& method,
                                     const std::string& metric) const {
  for (const auto& row : rows) {
    if (row.sweep_value == sweep_value && row.method == method && row.metric == metric) {
      return &row;
    }
  }
  return nullptr;
}

double mc_tolerance(const MetricsRow& row) {
  return 3.0 * row.std / std::sqrt(static_cast<double>(std::max<std::size_t>(row.outer_reps, 1)));
}

std::vector<WinRateRecord> generate_winrate_records(const WinRateSpec& spec,
                                                    std::uint64_t seed) {
  std::vector<WinRateRecord> records;
  Rng rng(derive_seed(seed, {}));
  auto make = [&](std::size_t count, double p_win, double p_loss, bool synthetic,
                  const char* prefix) {
    for (std::size_t i = 0; i < count; ++i) {
      const double u = uniform01(rng);
      WinRateRecord r;
      r.item_id = prefix + std::to_string(i);
      r.synthetic = synthetic;
      if (u < p_win) {
        r.model_a_correct = true;
      } else if (u < p_win + p_loss) {
        r.model_b_correct = true;
      } else {
        const bool both = uniform01(rng) < 0.5;
        r.model_a_correct = both;
        r.model_b_correct = both;
      }
      records.push_back(std::move(r));
    }
  };
  make(spec.real_pool, spec.p_win, spec.p_loss, false, "real-");
  make(spec.synth_pool, spec.p_win_synth, spec.p_loss_synth, true, "synth-");
  return records;
}

MetricsTable run_binomial_experiment(const ExperimentSpec& spec, unsigned workers) {
  require_task(spec, {Task::BinomialTest});
  return drive(spec, workers, binomial_kernel);
}

MetricsTable run_outlier_experiment(const ExperimentSpec& spec, unsigned workers) {
  require_task(spec, {Task::OutlierSingle, Task::OutlierFWER});
  return drive(spec, workers,
               spec.task == Task::OutlierSingle ? outlier_single_kernel : outlier_fwer_kernel);
}

MetricsTable run_conformal_experiment(const ExperimentSpec& spec, unsigned workers) {
  require_task(spec, {Task::Conformal});
  return drive(spec, workers, conformal_kernel);
}

MetricsTable run_crc_experiment(const ExperimentSpec& spec, unsigned workers) {
  require_task(spec, {Task::RiskControl});
  return drive(spec, workers, crc_kernel);
}

MetricsTable run_winrate_experiment(const ExperimentSpec& spec, unsigned workers) {
  require_task(spec, {Task::WinRate});
  return drive(spec, workers, winrate_kernel);
}

MetricsTable run_two_sample_experiment(const ExperimentSpec& spec, unsigned workers) {
  require_task(spec, {Task::TwoSample});
  return drive(spec, workers, two_sample_kernel);
}

MetricsTable run_experiment(const ExperimentSpec& spec, unsigned workers) {
  switch (spec.task) {
    case Task::BinomialTest: return run_binomial_experiment(spec, workers);
    case Task::WinRate: return run_winrate_experiment(spec, workers);
    case Task::OutlierSingle:
    case Task::OutlierFWER: return run_outlier_experiment(spec, workers);
    case Task::Conformal: return run_conformal_experiment(spec, workers);
    case Task::RiskControl: return run_crc_experiment(spec, workers);
    case Task::TwoSample: return run_two_sample_experiment(spec, workers);
  }
  throw std::domain_error("unknown task");
}

}  // namespace gespi
