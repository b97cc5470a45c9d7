#pragma once

// Monte-Carlo harnesses comparing OnlyReal, OnlySynth, Gespi and Oracle.
//
// Every experiment is a grid of (sweep value, outer rep) units. A unit runs
// inner_trials trials and reports one mean per (method, metric); the table
// row for a sweep value then holds the mean and the standard deviation of
// those unit means across outer reps. Trial t of rep r at sweep index s draws
// from derive_seed(seed, {s, r, t}), so results do not depend on the number
// of worker threads.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gespi/bounds_oracles.hpp"
#include "gespi/combinator.hpp"

namespace gespi {

enum class Task {
  BinomialTest,
  WinRate,
  OutlierSingle,
  OutlierFWER,
  Conformal,
  RiskControl,
  TwoSample,
};

enum class Method { OnlyReal, OnlySynth, Gespi, GespiOneSided, Oracle };

std::string to_string(Task task);
std::string to_string(Method method);
Task parse_task(const std::string& name);
Method parse_method(const std::string& name);

struct Sweep {
  std::string param = "alpha";
  std::vector<double> values;  // empty means "the current value of the swept parameter"
};

/// Gaussian mean-shift contamination model for the outlier tasks. The clean
/// reference size is ExperimentSpec::n and the contaminated pool size is
/// ExperimentSpec::N.
struct ContaminationSpec {
  std::size_t dimension = 8;
  double outlier_shift = 3.0;  // Euclidean norm of the outlier mean
  double contamination_rate = 0.05;
  double trim_rate = 0.05;
  std::size_t training_size = 1000;
  std::size_t test_inliers = 190;
  std::size_t test_outliers = 10;
  std::size_t batch_count = 10;
};

/// Score law for the conformal task: a Gaussian unless `discrete` is set.
struct ScoreModel {
  double mean = 0.0;
  double sd = 1.0;
  std::optional<DiscreteDist> discrete;

  double draw(Rng& rng) const;
};

struct ConformalSpec {
  ScoreModel real;
  ScoreModel synth;
};

/// Residue-level risk control: each item has `residues` residues with a
/// confidence c ~ U(0, 100) and an error that shrinks with c. A residue is
/// abstained on when c < lambda; the loss of an item at lambda is the
/// fraction of its residues with error above `error_cutoff` that are not
/// abstained on. Synthetic items carry proxy errors
/// error + proxy_bias + proxy_noise * Z, or zero loss when zero_loss_proxy.
struct RiskControlSpec {
  std::size_t residues = 50;
  std::size_t test_items = 20;
  double lambda_step = 1.0;
  double error_cutoff = 3.0;
  double proxy_bias = 0.0;
  double proxy_noise = 0.0;
  bool zero_loss_proxy = false;
};

/// One evaluated item: did model A / model B answer correctly.
struct WinRateRecord {
  std::string item_id;
  bool model_a_correct = false;
  bool model_b_correct = false;
  bool synthetic = false;
};

/// Records come from ingestion; when none are supplied they are generated
/// from the outcome probabilities below.
struct WinRateSpec {
  std::vector<WinRateRecord> records;
  bool shuffled = false;
  double p_win = 0.4;
  double p_loss = 0.2;
  double p_win_synth = 0.4;
  double p_loss_synth = 0.2;
  std::size_t real_pool = 30;
  std::size_t synth_pool = 1000;
};

struct TwoSampleSpec {
  double effect = 0.5;        // mean shift of group A on real data
  double effect_synth = 0.4;  // same on synthetic data
  std::size_t n_perms = 200;
};

struct ExperimentSpec {
  Task task = Task::BinomialTest;
  double rho = 0.6;
  double rho_synt = 0.55;
  std::size_t n = 50;
  std::size_t N = 500;
  double alpha = 0.05;
  double epsilon = 0.02;
  std::size_t inner_trials = 100;
  std::size_t outer_reps = 100;
  Sweep sweep;
  std::vector<Method> methods;
  std::uint64_t seed = 0;
  GuardrailVariant variant = GuardrailVariant::TwoSided;

  ContaminationSpec contamination;
  ConformalSpec conformal;
  RiskControlSpec risk;
  WinRateSpec winrate;
  TwoSampleSpec two_sample;

  /// Throws std::domain_error naming the offending field.
  void validate() const;
};

/// Task defaults: n = 50, N = 500, alpha = 0.05, epsilon = 0.02 for the
/// binomial, win-rate, conformal and two-sample tasks; alpha = 0.02,
/// epsilon = 0.01, n = 40 for single outlier detection; alpha = 0.15,
/// epsilon = 0.10, n = 100 for batch FWER; alpha = 0.1, epsilon = 0.05,
/// n = 10, N = 100 for risk control.
ExperimentSpec default_spec(Task task);

/// Methods a task can evaluate, in output order.
std::vector<Method> supported_methods(Task task);

/// Parameters accepted by Sweep::param for a task.
std::vector<std::string> sweep_parameters(Task task);

/// Copy of spec with the named parameter set to value.
ExperimentSpec with_parameter(ExperimentSpec spec, const std::string& param, double value);

struct MetricsRow {
  std::string sweep_param;
  double sweep_value = 0.0;
  std::string method;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  std::size_t inner_trials = 0;
  std::size_t outer_reps = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  // Trials where a two-sided Gespi action left [base, guardrail].
  std::uint64_t sandwich_violations = 0;

  const MetricsRow* find(double sweep_value, const std::string& method,
                         const std::string& metric) const;
};

/// 3 * std / sqrt(outer_reps).
double mc_tolerance(const MetricsRow& row);

/// Dispatches on spec.task. workers = 0 means one.
MetricsTable run_experiment(const ExperimentSpec& spec, unsigned workers = 1);

MetricsTable run_binomial_experiment(const ExperimentSpec& spec, unsigned workers = 1);
MetricsTable run_outlier_experiment(const ExperimentSpec& spec, unsigned workers = 1);
MetricsTable run_conformal_experiment(const ExperimentSpec& spec, unsigned workers = 1);
MetricsTable run_crc_experiment(const ExperimentSpec& spec, unsigned workers = 1);
MetricsTable run_winrate_experiment(const ExperimentSpec& spec, unsigned workers = 1);
MetricsTable run_two_sample_experiment(const ExperimentSpec& spec, unsigned workers = 1);

/// Records drawn from the outcome probabilities in spec.winrate.
std::vector<WinRateRecord> generate_winrate_records(const WinRateSpec& spec,
                                                    std::uint64_t seed);

}  // namespace gespi
