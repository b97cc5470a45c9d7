// Acceptance run: one PASS/FAIL line per criterion, then a summary. Exits
// nonzero when any line fails. Tolerances are pinned below; Monte-Carlo
// tolerances are 3 standard errors from outer-rep dispersion (mc_tolerance).

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "closure_oracle.hpp"
#include "gespi/bounds_oracles.hpp"
#include "gespi/cli_io.hpp"
#include "gespi/combinator.hpp"
#include "gespi/conformal.hpp"
#include "gespi/hypothesis_tests.hpp"
#include "gespi/multiple_testing.hpp"
#include "gespi/numerics.hpp"
#include "gespi/parallel.hpp"
#include "gespi/simulation.hpp"

namespace {

using namespace gespi;

constexpr double kExactTol = 1e-12;          // criterion 2
constexpr std::size_t kSandwichTrials = 10000;  // criterion 3, per instance
constexpr std::size_t kCoverageInner = 1000;    // criterion 4: 1000 x 100 = 10^5 trials
constexpr std::size_t kCoverageOuter = 100;
constexpr std::size_t kRankDraws = 1000000;     // criterion 5
constexpr double kHochbergAlpha = 0.05;         // criterion 6
constexpr std::uint64_t kSeed = 20240611;

unsigned g_workers = 1;

class Report {
 public:
  void line(const std::string& id, bool pass, const std::string& what, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << "  " << id << "  " << what << " | " << detail
              << std::endl;
    (pass ? passed_ : failed_)++;
  }
  void note(const std::string& text) { std::cout << "      " << text << std::endl; }
  int finish() const {
    std::cout << "\n" << passed_ << " passed, " << failed_ << " failed" << std::endl;
    return failed_ == 0 ? 0 : 1;
  }

 private:
  int passed_ = 0;
  int failed_ = 0;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

std::string with_tol(const MetricsRow& row) {
  return fmt(row.mean) + " (tol " + fmt(mc_tolerance(row), 3) + ")";
}

const MetricsRow& row_of(const MetricsTable& t, double sweep, const char* method, const char* metric) {
  const MetricsRow* r = t.find(sweep, method, metric);
  if (!r) throw std::runtime_error(std::string("missing row ") + method + "/" + metric);
  return *r;
}

// ---------------------------------------------------------------------------

void criterion1(Report& rep) {
  auto spec = default_spec(Task::BinomialTest);
  spec.seed = kSeed;
  const double a = spec.alpha;

  spec.rho = 0.5;
  spec.rho_synt = 0.5;
  auto t = run_experiment(spec, g_workers);
  {
    const auto& g = row_of(t, a, "Gespi", "type_i_error");
    const auto& r = row_of(t, a, "OnlyReal", "type_i_error");
    rep.line("1a", g.mean <= 0.05 + mc_tolerance(g) && r.mean <= 0.05 + mc_tolerance(r),
             "rho = rho_synt = 0.5: Gespi, OnlyReal type I error <= 0.05 + tol",
             "Gespi " + with_tol(g) + ", OnlyReal " + with_tol(r));
  }

  spec.rho = 0.5;
  spec.rho_synt = 0.55;
  t = run_experiment(spec, g_workers);
  {
    const auto& g = row_of(t, a, "Gespi", "type_i_error");
    const auto& r = row_of(t, a, "OnlyReal", "type_i_error");
    rep.line("1b", g.mean <= 0.07 + mc_tolerance(g) && r.mean <= 0.05 + mc_tolerance(r),
             "rho = 0.5, rho_synt = 0.55: Gespi <= 0.07 + tol, OnlyReal <= 0.05 + tol",
             "Gespi " + with_tol(g) + ", OnlyReal " + with_tol(r));
  }

  spec.rho = 0.6;
  spec.rho_synt = 0.55;
  t = run_experiment(spec, g_workers);
  {
    const auto& g = row_of(t, a, "Gespi", "power");
    const auto& r = row_of(t, a, "OnlyReal", "power");
    rep.line("1c", g.mean >= r.mean - mc_tolerance(g) && g.mean - r.mean >= 0.02,
             "rho = 0.6, rho_synt = 0.55: Gespi power >= OnlyReal - tol and exceeds it by >= 0.02",
             "Gespi " + with_tol(g) + ", OnlyReal " + with_tol(r) + ", gap " + fmt(g.mean - r.mean));
  }

  spec.sweep.param = "epsilon";
  spec.sweep.values = {0.0, 0.01, 0.02, 0.05, 0.1};
  t = run_experiment(spec, g_workers);
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < spec.sweep.values.size(); ++i) {
    const auto& cur = row_of(t, spec.sweep.values[i], "Gespi", "power");
    detail += (i ? ", " : "") + fmt(cur.mean);
    if (i == 0) continue;
    const auto& prev = row_of(t, spec.sweep.values[i - 1], "Gespi", "power");
    // Both rows carry their own tolerance; the larger one is used.
    if (cur.mean < prev.mean - std::max(mc_tolerance(cur), mc_tolerance(prev))) ok = false;
  }
  rep.line("1d", ok, "epsilon sweep {0, .01, .02, .05, .1}: Gespi power nondecreasing up to tol",
           "power " + detail);
}

// ---------------------------------------------------------------------------

void criterion2(Report& rep) {
  using boost::multiprecision::cpp_rational;
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::uint64_t n = 1; n <= 30; ++n) {
    // Binom(n, 1/2) pmf from exact binomial coefficients.
    std::vector<double> pmf(n + 1);
    const boost::multiprecision::cpp_int total = boost::multiprecision::cpp_int(1) << n;
    for (std::uint64_t w = 0; w <= n; ++w) {
      pmf[w] = cpp_rational(exact_choose(n, w), total).convert_to<double>();
    }
    for (int step = 1; step <= 99; ++step) {
      const double alpha = step / 100.0;
      const RandomizedBinomialTest test(n, 0.5, alpha);
      double level = 0.0;
      for (std::uint64_t w = 0; w <= n; ++w) level += test.rejection_probability(w) * pmf[w];
      worst = std::max(worst, std::abs(level - alpha));
      ++cases;
    }
  }
  rep.line("2", worst <= kExactTol,
           "randomized binomial test has exact level for n <= 30, alpha in {0.01..0.99}",
           std::to_string(cases) + " cases, max |level - alpha| = " + fmt(worst, 3) +
               " (tol 1e-12)");
}

// ---------------------------------------------------------------------------

template <class Action>
bool sandwiched(const GespiOutput<Action>& o) {
  return leq(o.base_action, o.action) && leq(o.action, o.guardrail_action);
}

void criterion3(Report& rep) {
  struct Counts {
    std::size_t binary_random = 0, binary_sign = 0, sets = 0, thresholds = 0, crc = 0;
  } bad;

  const auto binom = randomized_binomial_procedure(0.5);
  const auto sign = sign_test_procedure();
  BaseProcedure<double> quantile{
      [](std::span<const double> s, double level, std::uint64_t) -> PartialAction {
        return conformal_quantile(s, level);
      },
      true};

  for (std::size_t t = 0; t < kSandwichTrials; ++t) {
    Rng rng = make_rng(kSeed, {3, t});
    auto unif = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
    auto count = [&](std::size_t lo, std::size_t hi) {
      return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
    };
    const double alpha = unif(0.01, 0.4);
    const double eps = unif(0.0, 0.3);
    const GespiConfig cfg{alpha, eps, GuardrailVariant::TwoSided, rng()};

    // Binary, randomized: Bernoulli records with different real/synth rates.
    {
      const double rho = unif(0.3, 0.8), rho_s = unif(0.2, 0.9);
      std::vector<std::uint8_t> real(count(1, 60)), synth(count(0, 300));
      for (auto& x : real) x = uniform01(rng) < rho;
      for (auto& x : synth) x = uniform01(rng) < rho_s;
      if (!sandwiched(gespi<std::uint8_t>(binom, real, synth, cfg))) ++bad.binary_random;
    }
    // Binary, deterministic sign test.
    {
      std::vector<double> real(count(1, 60)), synth(count(0, 300));
      const double shift = unif(-0.5, 1.0);
      for (auto& x : real) x = shift + std::normal_distribution<double>()(rng);
      for (auto& x : synth) x = unif(-1.0, 1.5) + std::normal_distribution<double>()(rng);
      if (!sandwiched(gespi<double>(sign, real, synth, cfg))) ++bad.binary_sign;
    }
    // Rejection sets: conformal p-values followed by an FWER rule.
    {
      const std::size_t m = count(1, 12);
      std::vector<double> tests(m);
      for (auto& x : tests) x = unif(-1.0, 4.0);
      const FwerRule rule = (t % 2 == 0) ? FwerRule{}
                                         : FwerRule{FwerRule::Kind::BonferroniKFwer, count(1, m)};
      const auto proc = conformal_fwer_procedure(tests, rule);
      std::vector<double> real(count(1, 80)), synth(count(0, 300));
      for (auto& x : real) x = std::normal_distribution<double>()(rng);
      const double shift = unif(-2.0, 2.0);
      for (auto& x : synth) x = shift + std::normal_distribution<double>()(rng);
      if (!sandwiched(gespi<double>(proc, real, synth, cfg))) ++bad.sets;
    }
    // Thresholds: split-conformal quantile, generic wrapper and direct form.
    {
      std::vector<double> real(count(1, 80)), synth(count(0, 400));
      for (auto& x : real) x = std::normal_distribution<double>()(rng);
      const double shift = unif(-5.0, 5.0);
      for (auto& x : synth) x = shift + std::normal_distribution<double>()(rng);
      const auto out = gespi<double>(quantile, real, synth, cfg);
      const auto direct = gespi_conformal_threshold(real, synth, cfg);
      if (!sandwiched(out) || !(leq(conformal_quantile(real, alpha), direct) &&
                                leq(direct, conformal_quantile(real, alpha + eps)))) {
        ++bad.thresholds;
      }
    }
    // Thresholds: conformal risk control on random monotone loss grids.
    {
      const std::vector<double> lambdas = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
      auto rows = [&](std::size_t points, double scale) {
        std::vector<double> flat;
        for (std::size_t i = 0; i < points; ++i) {
          double v = std::min(1.0, scale * uniform01(rng));
          for (std::size_t j = 0; j < lambdas.size(); ++j) {
            flat.push_back(v);
            v *= uniform01(rng);
          }
        }
        return flat;
      };
      const RiskGrid real(lambdas, rows(count(1, 30), 1.0), 1.0);
      const RiskGrid synth(lambdas, rows(count(1, 200), unif(0.0, 2.0)), 1.0);
      const auto lam = gespi_crc(real, real.concat(synth), cfg);
      if (!(leq(crc_lambda(real, alpha), lam) && leq(lam, crc_lambda(real, alpha + eps)))) ++bad.crc;
    }
  }
  const std::size_t total = bad.binary_random + bad.binary_sign + bad.sets + bad.thresholds + bad.crc;
  rep.line("3", total == 0, "two-sided sandwich over 10^4 random trials per action-space instance",
           "violations: randomized binomial " + std::to_string(bad.binary_random) + ", sign test " +
               std::to_string(bad.binary_sign) + ", conformal FWER sets " +
               std::to_string(bad.sets) + ", conformal thresholds " +
               std::to_string(bad.thresholds) + ", CRC lambdas " + std::to_string(bad.crc));
}

// ---------------------------------------------------------------------------

void criterion4(Report& rep) {
  auto spec = default_spec(Task::Conformal);
  spec.seed = kSeed;
  spec.inner_trials = kCoverageInner;
  spec.outer_reps = kCoverageOuter;
  spec.methods = {Method::OnlyReal, Method::Gespi, Method::Oracle};
  const double a = spec.alpha;
  const double target = 1.0 - a;

  auto t = run_experiment(spec, g_workers);
  const auto& same = row_of(t, a, "Gespi", "coverage");
  rep.line("4a", same.mean >= target - mc_tolerance(same),
           "Q = P, n = 50, N = 500, 10^5 trials: Gespi coverage >= 0.95 - tol",
           "Gespi " + with_tol(same) + ", OnlyReal " + fmt(row_of(t, a, "OnlyReal", "coverage").mean));

  spec.conformal.synth.mean = 5.0;
  t = run_experiment(spec, g_workers);
  const auto& up = row_of(t, a, "Gespi", "coverage");
  rep.line("4b", up.mean >= target - spec.epsilon - mc_tolerance(up),
           "synthetic scores shifted by +5: Gespi coverage >= 0.95 - eps - tol",
           "Gespi " + with_tol(up) + ", eps " + fmt(spec.epsilon));

  // The shift that pulls the pooled quantile down is the one that can cost
  // coverage, so it is checked against the same bound.
  spec.conformal.synth.mean = -5.0;
  t = run_experiment(spec, g_workers);
  const auto& down = row_of(t, a, "Gespi", "coverage");
  rep.line("4c", down.mean >= target - spec.epsilon - mc_tolerance(down),
           "supplementary, synthetic scores shifted by -5: Gespi coverage >= 0.95 - eps - tol",
           "Gespi " + with_tol(down) + ", eps " + fmt(spec.epsilon));
}

// ---------------------------------------------------------------------------

void criterion5(Report& rep) {
  const std::array<std::pair<std::size_t, std::size_t>, 3> sizes = {{{5, 10}, {10, 50}, {50, 500}}};
  const std::array<double, 3> deltas = {0.01, 0.05, 0.1};
  const std::array<double, 2> alphas = {0.05, 0.1};
  bool all = true;
  std::vector<std::string> details;
  for (auto [n, N] : sizes) {
    const auto counts = rank_count_table(n, N, kRankDraws, derive_seed(kSeed, {5, n, N}), g_workers);
    for (double alpha : alphas) {
      const std::size_t K = std::min(conformal_rank(N + n, alpha), N + n);
      std::vector<double> survival(n);
      for (std::size_t r = 1; r <= n; ++r) {
        std::uint64_t hits = 0;
        for (std::size_t k = 1; k <= K; ++k) hits += counts[r - 1][k - 1];
        survival[r - 1] = static_cast<double>(hits) / static_cast<double>(kRankDraws);
      }
      for (double delta : deltas) {
        std::size_t mc_rank = 0;
        for (std::size_t r = 1; r <= n; ++r) {
          if (survival[r - 1] >= 1.0 - delta) mc_rank = r;
        }
        std::size_t exact_rank = 0;
        try {
          exact_rank = epsilon_from_delta(n, N, alpha, delta).guardrail_rank;
        } catch (const std::domain_error&) {
        }
        const bool ok = mc_rank == exact_rank;
        all = all && ok;
        // Margin of the MC survival at the exact rank and the next one, in standard errors.
        auto margin = [&](std::size_t r) {
          if (r < 1 || r > n) return std::string("-");
          const double s = survival[r - 1];
          const double se = std::sqrt(std::max(s * (1 - s), 1e-12) / kRankDraws);
          return fmt((s - (1.0 - delta)) / se, 3);
        };
        details.push_back("(" + std::to_string(n) + "," + std::to_string(N) + ",a=" + fmt(alpha) +
                          ",d=" + fmt(delta) + ") exact r=" + std::to_string(exact_rank) +
                          " mc r=" + std::to_string(mc_rank) + " margins " + margin(exact_rank) +
                          "/" + margin(exact_rank + 1) + " se" + (ok ? "" : " MISMATCH"));
      }
    }
  }
  rep.line("5", all, "r_delta from hypergeometric sums equals the 10^6-draw rank-oracle value",
           std::to_string(details.size()) + " (n, N, alpha, delta) cases");
  for (const auto& d : details) rep.note(d);
}

// ---------------------------------------------------------------------------

// Closed testing over all intersections of up to four hypotheses with the
// Simes local test (simes = true) or the step-up local test.
std::uint32_t closure_mask(const std::array<double, 4>& p, std::size_t m, double alpha, bool simes) {
  std::array<double, 4> q{};
  const std::uint32_t full = (1U << m) - 1;
  std::uint32_t accepted_any = 0;  // union of intersections the local test accepts
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    std::size_t size = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask & (1U << j)) q[size++] = p[j];
    }
    std::sort(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(size));
    bool reject = false;
    for (std::size_t i = 0; i < size && !reject; ++i) {
      const double cut = simes ? static_cast<double>(i + 1) * alpha / static_cast<double>(size)
                               : alpha / static_cast<double>(size - i);
      reject = q[i] <= cut;
    }
    if (!reject) accepted_any |= mask;
  }
  return full & ~accepted_any;
}

std::uint32_t to_mask(const RejectionSet& s) {
  std::uint32_t mask = 0;
  for (auto j : s.members()) mask |= 1U << (j - 1);
  return mask;
}

void criterion6(Report& rep) {
  // Cross-check the fast closure against the generic oracle on a sample first.
  std::size_t oracle_disagreements = 0;
  for (std::uint64_t t = 0; t < 20000; ++t) {
    Rng rng = make_rng(kSeed, {6, t});
    const std::size_t m = 1 + rng() % 4;
    std::array<double, 4> p{};
    std::vector<double> pv(m);
    for (std::size_t j = 0; j < m; ++j) pv[j] = p[j] = static_cast<double>(1 + rng() % 100) / 100.0;
    if (closure_mask(p, m, kHochbergAlpha, true) !=
            to_mask(testing::closed_testing(pv, kHochbergAlpha, testing::simes_local)) ||
        closure_mask(p, m, kHochbergAlpha, false) !=
            to_mask(testing::closed_testing(pv, kHochbergAlpha, testing::hochberg_local))) {
      ++oracle_disagreements;
    }
  }

  struct Tally {
    std::uint64_t cases = 0, simes_mismatch = 0, stepup_mismatch = 0, not_subset = 0;
  };
  std::array<Tally, 5> tally{};
  std::array<double, 4> first_counterexample{};
  std::size_t first_m = 0;
  for (std::size_t m = 1; m <= 4; ++m) {
    std::size_t total = 1;
    for (std::size_t j = 0; j < m; ++j) total *= 100;
    // One work item per leading p-value keeps the per-item state small.
    std::vector<Tally> parts(100);
    std::vector<std::array<double, 4>> witness(100, std::array<double, 4>{});
    parallel_for(100, g_workers, [&](std::size_t lead) {
      Tally& part = parts[lead];
      std::array<double, 4> p{};
      std::vector<double> pv(m);
      p[0] = static_cast<double>(lead + 1) / 100.0;
      const std::size_t rest = total / 100;
      for (std::size_t code = 0; code < rest; ++code) {
        std::size_t c = code;
        for (std::size_t j = 1; j < m; ++j) {
          p[j] = static_cast<double>(c % 100 + 1) / 100.0;
          c /= 100;
        }
        std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(m), pv.begin());
        const std::uint32_t h = to_mask(hochberg(PValueVector(pv), kHochbergAlpha));
        const std::uint32_t simes = closure_mask(p, m, kHochbergAlpha, true);
        const std::uint32_t stepup = closure_mask(p, m, kHochbergAlpha, false);
        ++part.cases;
        if (h != simes) {
          if (part.simes_mismatch == 0) witness[lead] = p;
          ++part.simes_mismatch;
        }
        if (h != stepup) ++part.stepup_mismatch;
        if ((h & ~simes) != 0) ++part.not_subset;
      }
    });
    for (std::size_t lead = 0; lead < 100; ++lead) {
      const auto& part = parts[lead];
      tally[m].cases += part.cases;
      tally[m].simes_mismatch += part.simes_mismatch;
      tally[m].stepup_mismatch += part.stepup_mismatch;
      tally[m].not_subset += part.not_subset;
      if (part.simes_mismatch > 0 && first_m == 0) {
        first_m = m;
        first_counterexample = witness[lead];
      }
    }
  }

  std::string simes_detail, stepup_detail;
  std::uint64_t simes_total = 0, stepup_total = 0, subset_total = 0;
  for (std::size_t m = 1; m <= 4; ++m) {
    simes_detail += (m > 1 ? ", " : "") + std::string("m=") + std::to_string(m) + ": " +
                    std::to_string(tally[m].simes_mismatch) + "/" + std::to_string(tally[m].cases);
    stepup_detail += (m > 1 ? ", " : "") + std::string("m=") + std::to_string(m) + ": " +
                     std::to_string(tally[m].stepup_mismatch) + "/" + std::to_string(tally[m].cases);
    simes_total += tally[m].simes_mismatch;
    stepup_total += tally[m].stepup_mismatch;
    subset_total += tally[m].not_subset;
  }
  rep.line("6", simes_total == 0 && oracle_disagreements == 0,
           "Hochberg equals brute-force closure of the Simes local test, full 0.01 grid, m <= 4, alpha = 0.05",
           "mismatches " + simes_detail);
  if (first_m > 0) {
    std::string p = "(";
    for (std::size_t j = 0; j < first_m; ++j) p += (j ? ", " : "") + fmt(first_counterexample[j]);
    rep.note("first mismatch p = " + p + "): the Simes closure is Hommel's procedure, which can reject more");
  }
  rep.line("6+", stepup_total == 0 && subset_total == 0 && oracle_disagreements == 0,
           "supplementary: Hochberg equals the closure of the step-up local test and never exceeds the Simes closure",
           "step-up closure mismatches " + stepup_detail + "; Hochberg outside Simes closure " +
               std::to_string(subset_total) + "; fast/generic oracle disagreements " +
               std::to_string(oracle_disagreements) + " of 20000");
}

// ---------------------------------------------------------------------------

void criterion7(Report& rep) {
  auto spec = default_spec(Task::OutlierFWER);
  spec.seed = kSeed;
  const double a = spec.alpha;
  const auto t = run_experiment(spec, g_workers);
  const auto& g = row_of(t, a, "Gespi", "fwer");
  const auto& o = row_of(t, a, "Oracle", "fwer");
  const auto& gp = row_of(t, a, "Gespi", "power");
  const auto& rp = row_of(t, a, "OnlyReal", "power");
  rep.line("7a", g.mean <= 0.25 + mc_tolerance(g), "outlier batches: Gespi FWER <= alpha + eps = 0.25 + tol",
           "Gespi " + with_tol(g));
  rep.line("7b", std::abs(o.mean - 0.15) <= mc_tolerance(o), "outlier batches: Oracle FWER within tol of 0.15",
           "Oracle " + with_tol(o) + ", |diff| " + fmt(std::abs(o.mean - 0.15)));
  rep.line("7c", gp.mean >= rp.mean - mc_tolerance(gp), "outlier batches: Gespi power >= OnlyReal power - tol",
           "Gespi " + with_tol(gp) + ", OnlyReal " + with_tol(rp));
  rep.note("OnlyReal FWER " + with_tol(row_of(t, a, "OnlyReal", "fwer")) + ", OnlySynth FWER " +
           with_tol(row_of(t, a, "OnlySynth", "fwer")));
}

// ---------------------------------------------------------------------------

void criterion8(Report& rep) {
  auto spec = default_spec(Task::RiskControl);
  spec.seed = kSeed;
  const double a = spec.alpha;

  spec.risk.zero_loss_proxy = true;
  auto t = run_experiment(spec, g_workers);
  const auto& adv = row_of(t, a, "Gespi", "risk");
  rep.line("8a", adv.mean <= a + spec.epsilon + mc_tolerance(adv),
           "zero-loss synthetic proxy: Gespi held-out risk <= alpha + eps + tol",
           "Gespi " + with_tol(adv) + ", OnlySynth " + fmt(row_of(t, a, "OnlySynth", "risk").mean) +
               ", bound " + fmt(a + spec.epsilon));

  spec.risk.zero_loss_proxy = false;
  t = run_experiment(spec, g_workers);
  const auto& risk = row_of(t, a, "Gespi", "risk");
  const auto& abst = row_of(t, a, "Gespi", "abstention_rate");
  const auto& real_abst = row_of(t, a, "OnlyReal", "abstention_rate");
  rep.line("8b", risk.mean <= a + mc_tolerance(risk) && abst.mean <= real_abst.mean,
           "unbiased proxy: Gespi risk <= alpha + tol and mean abstention <= OnlyReal's",
           "Gespi risk " + with_tol(risk) + ", abstention Gespi " + fmt(abst.mean) + " vs OnlyReal " +
               fmt(real_abst.mean));
}

// ---------------------------------------------------------------------------

void criterion9(Report& rep) {
  std::size_t cases = 0, failures = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (std::uint64_t n = 1; n <= 50; ++n) {
    for (int i = 1; i <= 19; ++i) {
      for (int j = 1; j <= 19; ++j) {
        const double p = i * 0.05, q = j * 0.05;
        const double slack = pinsker_bound(n, p, q) - tv_binomial(n, p, q);
        ++cases;
        if (!(slack >= 0.0)) ++failures;
        min_slack = std::min(min_slack, slack);
      }
    }
  }
  rep.line("9", failures == 0, "pinsker_bound >= tv_binomial for n <= 50, p, q in {0.05..0.95}",
           std::to_string(cases) + " cases, " + std::to_string(failures) + " exceptions, min slack " +
               fmt(min_slack, 3));
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gespi");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

void criterion10(Report& rep) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gespi_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> configs = {
      {"binomial", R"({"inner_trials": 50, "outer_reps": 20, "sweep": {"param": "epsilon", "values": [0, 0.05]}})"},
      {"winrate", R"({"inner_trials": 50, "outer_reps": 20, "winrate": {"shuffled": true}})"},
      {"outlier", R"({"inner_trials": 5, "outer_reps": 6})"},
      {"outlier_fwer", R"({"inner_trials": 3, "outer_reps": 6})"},
      {"conformal", R"({"inner_trials": 50, "outer_reps": 20, "sweep": {"param": "synth_shift", "values": [0, 5]}})"},
      {"crc", R"({"inner_trials": 10, "outer_reps": 10})"},
      {"two_sample", R"({"inner_trials": 10, "outer_reps": 6, "two_sample": {"n_perms": 50}})"},
  };
  std::vector<std::string> differing;
  std::size_t files = 0;
  for (const auto& [task, json] : configs) {
    const fs::path cfg = dir / (task + ".json");
    std::ofstream(cfg) << json;
    for (const char* format : {"csv", "json"}) {
      std::vector<std::string> outputs;
      for (const char* workers : {"1", "1", "4", "8"}) {
        const fs::path out = dir / (task + "_" + workers + "_" + std::to_string(outputs.size()) + "." + format);
        const int code = cli({"simulate", task, "--config", cfg.string(), "--seed", "17", "--workers",
                              workers, "--format", format, "-o", out.string()});
        outputs.push_back(code == 0 ? slurp(out) : std::string());
        ++files;
      }
      const bool same = !outputs[0].empty() &&
                        std::all_of(outputs.begin(), outputs.end(),
                                    [&](const std::string& s) { return s == outputs[0]; });
      if (!same) differing.push_back(task + "/" + format);
    }
  }
  fs::remove_all(dir);
  std::string detail = std::to_string(files) + " files over 7 tasks x {csv, json} x workers {1, 1, 4, 8}";
  if (!differing.empty()) {
    detail += "; differing:";
    for (const auto& d : differing) detail += " " + d;
  }
  rep.line("10", differing.empty(), "same seed, different worker counts: byte-identical output files", detail);
}

}  // namespace

int main(int argc, char** argv) {
  g_workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workers" && i + 1 < argc) {
      g_workers = static_cast<unsigned>(std::stoul(argv[++i]));
    } else {
      only.push_back(arg);  // criterion numbers to run; all when empty
    }
  }
  Report rep;
  const std::vector<std::pair<std::string, void (*)(Report&)>> criteria = {
      {"1", criterion1}, {"2", criterion2}, {"3", criterion3}, {"4", criterion4},  {"5", criterion5},
      {"6", criterion6}, {"7", criterion7}, {"8", criterion8}, {"9", criterion9}, {"10", criterion10},
  };
  std::cout << "acceptance run, workers = " << g_workers << ", seed = " << kSeed << "\n" << std::endl;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    try {
      run(rep);
    } catch (const std::exception& e) {
      rep.line(id, false, "criterion raised an error", e.what());
    }
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    rep.note("[" + id + "] " + fmt(took.count(), 3) + " s");
  }
  return rep.finish();
}
