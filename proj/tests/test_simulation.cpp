#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gespi/simulation.hpp"

using namespace gespi;

namespace {

const std::vector<Task> kTasks = {Task::BinomialTest, Task::WinRate,     Task::OutlierSingle,
                                  Task::OutlierFWER,  Task::Conformal,   Task::RiskControl,
                                  Task::TwoSample};

// Small enough to run every task in well under a second.
ExperimentSpec small_spec(Task task) {
  ExperimentSpec spec = default_spec(task);
  spec.inner_trials = 6;
  spec.outer_reps = 4;
  spec.seed = 20240611;
  switch (task) {
    case Task::OutlierSingle:
    case Task::OutlierFWER:
      spec.N = 60;
      spec.contamination.training_size = 200;
      spec.contamination.test_inliers = 38;
      spec.contamination.test_outliers = 2;
      spec.contamination.batch_count = 2;
      break;
    case Task::RiskControl:
      spec.N = 20;
      spec.risk.residues = 10;
      spec.risk.test_items = 5;
      spec.risk.lambda_step = 10.0;
      break;
    case Task::TwoSample:
      spec.n = 10;
      spec.N = 20;
      spec.two_sample.n_perms = 30;
      break;
    default:
      break;
  }
  return spec;
}

std::string message_of(const ExperimentSpec& spec) {
  try {
    spec.validate();
  } catch (const std::domain_error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Simulation, TaskDefaults) {
  const auto bin = default_spec(Task::BinomialTest);
  EXPECT_EQ(bin.n, 50U);
  EXPECT_EQ(bin.N, 500U);
  EXPECT_DOUBLE_EQ(bin.alpha, 0.05);
  EXPECT_DOUBLE_EQ(bin.epsilon, 0.02);
  EXPECT_EQ(bin.inner_trials, 100U);
  EXPECT_EQ(bin.outer_reps, 100U);
  EXPECT_EQ(bin.variant, GuardrailVariant::TwoSided);

  const auto single = default_spec(Task::OutlierSingle);
  EXPECT_EQ(single.n, 40U);
  EXPECT_DOUBLE_EQ(single.alpha, 0.02);
  EXPECT_DOUBLE_EQ(single.epsilon, 0.01);

  const auto fwer = default_spec(Task::OutlierFWER);
  EXPECT_EQ(fwer.n, 100U);
  EXPECT_DOUBLE_EQ(fwer.alpha, 0.15);
  EXPECT_DOUBLE_EQ(fwer.epsilon, 0.10);

  const auto crc = default_spec(Task::RiskControl);
  EXPECT_EQ(crc.n, 10U);
  EXPECT_EQ(crc.N, 100U);
  EXPECT_DOUBLE_EQ(crc.alpha, 0.1);

  for (Task t : kTasks) {
    EXPECT_EQ(default_spec(t).methods, supported_methods(t));
    EXPECT_NO_THROW(default_spec(t).validate()) << to_string(t);
  }
}

TEST(Simulation, OracleOnlyWhereDefined) {
  for (Task t : kTasks) {
    const auto m = supported_methods(t);
    const bool has_oracle = std::find(m.begin(), m.end(), Method::Oracle) != m.end();
    EXPECT_EQ(has_oracle, t == Task::OutlierSingle || t == Task::OutlierFWER || t == Task::Conformal)
        << to_string(t);
    EXPECT_EQ(m.front(), Method::OnlyReal);
  }
}

TEST(Simulation, NamesRoundTrip) {
  std::set<std::string> names;
  for (Task t : kTasks) {
    EXPECT_EQ(parse_task(to_string(t)), t);
    names.insert(to_string(t));
  }
  EXPECT_EQ(names.size(), kTasks.size());
  for (Method m : {Method::OnlyReal, Method::OnlySynth, Method::Gespi, Method::GespiOneSided,
                   Method::Oracle}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_task("binomal"), std::domain_error);
  EXPECT_THROW(parse_method("gespi"), std::domain_error);
}

TEST(Simulation, ValidationNamesTheField) {
  auto spec = default_spec(Task::BinomialTest);
  spec.alpha = 1.5;
  EXPECT_NE(message_of(spec).find("'alpha'"), std::string::npos);

  spec = default_spec(Task::BinomialTest);
  spec.alpha = 0.6;
  spec.epsilon = 0.5;
  EXPECT_NE(message_of(spec).find("'epsilon'"), std::string::npos);

  spec = default_spec(Task::BinomialTest);
  spec.n = 0;
  EXPECT_NE(message_of(spec).find("'n'"), std::string::npos);

  spec = default_spec(Task::BinomialTest);
  spec.sweep.param = "trim_rate";
  EXPECT_NE(message_of(spec).find("'sweep.param'"), std::string::npos);

  spec = default_spec(Task::RiskControl);
  spec.methods.push_back(Method::Oracle);
  EXPECT_NE(message_of(spec).find("'methods'"), std::string::npos);

  spec = default_spec(Task::WinRate);
  spec.winrate.p_win = 0.7;
  spec.winrate.p_loss = 0.5;
  EXPECT_NE(message_of(spec).find("'winrate.p_loss'"), std::string::npos);

  spec = default_spec(Task::OutlierSingle);
  spec.contamination.contamination_rate = 1.0;
  EXPECT_NE(message_of(spec).find("'contamination.contamination_rate'"), std::string::npos);

  spec = default_spec(Task::Conformal);
  spec.conformal.synth.sd = 0.0;
  EXPECT_NE(message_of(spec).find("'conformal.sd'"), std::string::npos);

  spec = default_spec(Task::RiskControl);
  spec.risk.lambda_step = 0.0;
  EXPECT_NE(message_of(spec).find("'risk.lambda_step'"), std::string::npos);

  spec = default_spec(Task::BinomialTest);
  spec.sweep.values = {0.05, std::nan("")};
  EXPECT_NE(message_of(spec).find("'sweep.values'"), std::string::npos);
}

TEST(Simulation, WithParameter) {
  const auto base = default_spec(Task::BinomialTest);
  EXPECT_DOUBLE_EQ(with_parameter(base, "rho", 0.7).rho, 0.7);
  EXPECT_EQ(with_parameter(base, "N", 30).N, 30U);
  EXPECT_THROW(with_parameter(base, "N", 2.5), std::domain_error);
  EXPECT_THROW(with_parameter(base, "gamma", 1.0), std::domain_error);
  for (Task t : kTasks) {
    for (const auto& p : sweep_parameters(t)) EXPECT_NO_THROW(with_parameter(default_spec(t), p, 1.0));
  }
}

TEST(Simulation, WrongHarnessIsRejected) {
  EXPECT_THROW(run_crc_experiment(small_spec(Task::BinomialTest)), std::domain_error);
  EXPECT_THROW(run_outlier_experiment(small_spec(Task::Conformal)), std::domain_error);
}

TEST(Simulation, IdenticalAcrossWorkerCounts) {
  for (Task t : kTasks) {
    auto spec = small_spec(t);
    spec.sweep.param = "alpha";
    spec.sweep.values = {spec.alpha, spec.alpha * 2};
    const auto one = run_experiment(spec, 1);
    const auto three = run_experiment(spec, 3);
    EXPECT_EQ(one.rows, three.rows) << to_string(t);
    EXPECT_EQ(one.sandwich_violations, three.sandwich_violations);
    EXPECT_EQ(run_experiment(spec, 1).rows, one.rows);
  }
}

TEST(Simulation, SeedChangesResults) {
  auto a = small_spec(Task::BinomialTest);
  auto b = a;
  b.seed = a.seed + 1;
  EXPECT_NE(run_experiment(a).rows, run_experiment(b).rows);
}

TEST(Simulation, RowLayoutAndMetricRanges) {
  for (Task t : kTasks) {
    auto spec = small_spec(t);
    spec.sweep.param = "epsilon";
    spec.sweep.values = {0.0, 0.01, 0.03};
    const auto table = run_experiment(spec, 2);
    EXPECT_EQ(table.sandwich_violations, 0U) << to_string(t);
    ASSERT_FALSE(table.rows.empty());
    EXPECT_EQ(table.rows.size() % 3, 0U);

    // Sweep values in order, methods in configured order within a value.
    std::size_t per_value = table.rows.size() / 3;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      EXPECT_EQ(row.sweep_param, "epsilon");
      EXPECT_EQ(row.sweep_value, spec.sweep.values[i / per_value]);
      EXPECT_EQ(row.inner_trials, spec.inner_trials);
      EXPECT_EQ(row.outer_reps, spec.outer_reps);
      EXPECT_EQ(row.seed, spec.seed);
      EXPECT_GE(row.std, 0.0);
      if (row.metric != "threshold" && row.metric != "lambda") {
        EXPECT_GE(row.mean, 0.0) << row.metric;
        EXPECT_LE(row.mean, 1.0) << row.metric;
      }
    }
    std::vector<std::string> seen;
    for (std::size_t i = 0; i < per_value; ++i) {
      if (seen.empty() || seen.back() != table.rows[i].method) seen.push_back(table.rows[i].method);
    }
    std::vector<std::string> expected;
    for (Method m : spec.methods) expected.push_back(to_string(m));
    EXPECT_EQ(seen, expected) << to_string(t);
  }
}

TEST(Simulation, MethodSubsetIsHonoured) {
  auto spec = small_spec(Task::Conformal);
  spec.methods = {Method::Oracle, Method::OnlyReal};
  const auto table = run_experiment(spec);
  ASSERT_EQ(table.rows.size(), 4U);
  EXPECT_EQ(table.rows[0].method, "Oracle");
  EXPECT_EQ(table.rows[2].method, "OnlyReal");
}

TEST(Simulation, DefaultSweepUsesOwnValue) {
  auto spec = small_spec(Task::BinomialTest);
  const auto table = run_experiment(spec);
  ASSERT_EQ(table.rows.size(), 4U);
  for (const auto& row : table.rows) EXPECT_EQ(row.sweep_value, spec.alpha);
}

TEST(Simulation, ZeroEpsilonGespiMatchesOnlyReal) {
  // With epsilon = 0 the guardrail equals the base, so the sandwich pins Gespi.
  for (Task t : {Task::BinomialTest, Task::Conformal, Task::RiskControl, Task::WinRate}) {
    auto spec = small_spec(t);
    spec.epsilon = 0.0;
    const auto table = run_experiment(spec);
    for (const auto& row : table.rows) {
      if (row.method != "Gespi") continue;
      const auto* real = table.find(row.sweep_value, "OnlyReal", row.metric);
      ASSERT_NE(real, nullptr);
      EXPECT_EQ(row.mean, real->mean) << to_string(t) << ' ' << row.metric;
    }
  }
}

TEST(Simulation, BinomialLevelAndPowerTrends) {
  auto spec = default_spec(Task::BinomialTest);
  spec.inner_trials = 200;
  spec.outer_reps = 20;
  spec.rho = 0.5;
  spec.rho_synt = 0.5;
  const auto null = run_experiment(spec, 4);
  const auto* real = null.find(spec.alpha, "OnlyReal", "type_i_error");
  ASSERT_NE(real, nullptr);
  EXPECT_NEAR(real->mean, spec.alpha, 0.02);  // randomized test is exact

  spec.rho = 0.6;
  spec.rho_synt = 0.6;
  const auto alt = run_experiment(spec, 4);
  const auto* base = alt.find(spec.alpha, "OnlyReal", "power");
  const auto* gespi = alt.find(spec.alpha, "Gespi", "power");
  ASSERT_TRUE(base && gespi);
  EXPECT_GT(gespi->mean, base->mean);
}

TEST(Simulation, ConformalOracleCoverage) {
  auto spec = small_spec(Task::Conformal);
  spec.inner_trials = 400;
  spec.outer_reps = 10;
  spec.alpha = 0.1;
  const auto table = run_experiment(spec, 4);
  const auto* oracle = table.find(0.1, "Oracle", "coverage");
  ASSERT_NE(oracle, nullptr);
  EXPECT_NEAR(oracle->mean, 0.9, 0.03);
}

TEST(Simulation, McTolerance) {
  MetricsRow row;
  row.std = 0.2;
  row.outer_reps = 100;
  EXPECT_DOUBLE_EQ(mc_tolerance(row), 0.06);
  row.outer_reps = 0;
  EXPECT_DOUBLE_EQ(mc_tolerance(row), 0.6);
}

TEST(Simulation, FindReturnsNullWhenAbsent) {
  MetricsTable table;
  table.rows.push_back({"alpha", 0.05, "Gespi", "power", 0.3, 0.1, 10, 10, 0});
  EXPECT_NE(table.find(0.05, "Gespi", "power"), nullptr);
  EXPECT_EQ(table.find(0.05, "Gespi", "type_i_error"), nullptr);
  EXPECT_EQ(table.find(0.1, "Gespi", "power"), nullptr);
}

TEST(WinRateRecords, GeneratedDeterministicallyWithStableIds) {
  WinRateSpec ws;
  ws.real_pool = 12;
  ws.synth_pool = 30;
  const auto a = generate_winrate_records(ws, 7);
  const auto b = generate_winrate_records(ws, 7);
  ASSERT_EQ(a.size(), 42U);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].item_id, b[i].item_id);
    EXPECT_EQ(a[i].model_a_correct, b[i].model_a_correct);
    EXPECT_EQ(a[i].model_b_correct, b[i].model_b_correct);
  }
  EXPECT_EQ(a[0].item_id, "real-0");
  EXPECT_FALSE(a[0].synthetic);
  EXPECT_EQ(a[12].item_id, "synth-0");
  EXPECT_TRUE(a[12].synthetic);
}

TEST(WinRateRecords, OutcomeFrequencies) {
  WinRateSpec ws;
  ws.real_pool = 40000;
  ws.synth_pool = 0;
  ws.p_win = 0.3;
  ws.p_loss = 0.1;
  std::size_t wins = 0, losses = 0;
  for (const auto& r : generate_winrate_records(ws, 3)) {
    wins += r.model_a_correct && !r.model_b_correct;
    losses += r.model_b_correct && !r.model_a_correct;
  }
  EXPECT_NEAR(wins / 40000.0, 0.3, 0.01);
  EXPECT_NEAR(losses / 40000.0, 0.1, 0.01);
}

TEST(WinRateRecords, IdenticalModelsNeverReject) {
  auto spec = small_spec(Task::WinRate);
  for (int i = 0; i < 15; ++i) spec.winrate.records.push_back({"r" + std::to_string(i), true, true, false});
  for (int i = 0; i < 100; ++i) spec.winrate.records.push_back({"s" + std::to_string(i), i % 2 == 0, i % 2 == 0, true});
  const auto table = run_experiment(spec);
  for (const auto& row : table.rows) EXPECT_EQ(row.mean, 0.0) << row.method;
}

TEST(WinRateRecords, TooFewRecordsIsAnError) {
  auto spec = small_spec(Task::WinRate);
  spec.winrate.records = {{"a", true, false, false}, {"b", false, false, true}};
  EXPECT_THROW(run_experiment(spec), std::domain_error);
}
