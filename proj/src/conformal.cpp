#include "gespi/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "gespi/numerics.hpp"

namespace gespi {

namespace {

void require_level(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error(std::string(what) + " must lie in (0, 1), got " +
                            std::to_string(alpha));
  }
}

}  // namespace

ScoreSample::ScoreSample(std::vector<double> scores) : scores_(std::move(scores)) {
  for (double s : scores_) {
    if (!std::isfinite(s)) throw std::domain_error("scores must be finite");
  }
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  require_level(alpha, "alpha");
  return robust_ceil((1.0 - alpha) * static_cast<double>(n + 1));
}

ThresholdAction conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw std::domain_error("conformal quantile of empty sample");
  const std::size_t k = conformal_rank(scores.size(), alpha);
  if (k > scores.size()) {
    return {std::numeric_limits<double>::infinity(),
            Direction::LargerIsMoreConservative};
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  return {*kth, Direction::LargerIsMoreConservative};
}

bool coverage_indicator(const ThresholdAction& threshold, double test_score) {
  if (threshold.direction() != Direction::LargerIsMoreConservative) {
    throw std::domain_error("coverage needs a quantile-style threshold");
  }
  return test_score <= threshold.threshold();
}

double conformal_pvalue(std::span<const double> cal, double test_score) {
  if (cal.empty()) throw std::domain_error("conformal p-value needs calibration scores");
  const auto at_least = std::count_if(cal.begin(), cal.end(),
                                      [&](double c) { return c >= test_score; });
  return (1.0 + static_cast<double>(at_least)) /
         (static_cast<double>(cal.size()) + 1.0);
}

std::vector<double> conformal_pvalues(std::span<const double> cal,
                                      std::span<const double> test_scores) {
  if (cal.empty()) throw std::domain_error("conformal p-value needs calibration scores");
  std::vector<double> sorted(cal.begin(), cal.end());
  std::sort(sorted.begin(), sorted.end());
  const double denom = static_cast<double>(sorted.size()) + 1.0;
  std::vector<double> out;
  out.reserve(test_scores.size());
  for (double s : test_scores) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin();
    const auto at_least = static_cast<double>(sorted.size()) - static_cast<double>(below);
    out.push_back((1.0 + at_least) / denom);
  }
  return out;
}

RiskGrid::RiskGrid(std::vector<double> lambdas, std::vector<double> losses,
                   double bound, LossMonotonicity monotonicity)
    : lambdas_(std::move(lambdas)),
      losses_(std::move(losses)),
      bound_(bound),
      monotonicity_(monotonicity) {
  if (lambdas_.empty()) throw std::domain_error("risk grid has no lambdas");
  for (std::size_t j = 0; j < lambdas_.size(); ++j) {
    if (!std::isfinite(lambdas_[j])) throw std::domain_error("grid lambdas must be finite");
    if (j > 0 && !(lambdas_[j] > lambdas_[j - 1])) {
      throw std::domain_error("grid lambdas must be strictly increasing");
    }
  }
  if (!(bound_ > 0.0) || !std::isfinite(bound_)) {
    throw std::domain_error("loss bound must be positive and finite");
  }
  if (losses_.size() % lambdas_.size() != 0) {
    throw std::domain_error("loss matrix size is not a multiple of the grid size");
  }
  points_ = losses_.size() / lambdas_.size();
  const std::size_t L = lambdas_.size();
  for (std::size_t i = 0; i < points_; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double v = losses_[i * L + j];
      if (!(v >= 0.0 && v <= bound_)) {
        throw std::domain_error("loss of point " + std::to_string(i) +
                                " outside [0, B]");
      }
      if (j == 0) continue;
      const double prev = losses_[i * L + j - 1];
      const bool ok = monotonicity_ == LossMonotonicity::NonIncreasing ? v <= prev
                                                                       : v >= prev;
      if (!ok) {
        throw std::domain_error("loss row " + std::to_string(i) +
                                " is not monotone in lambda");
      }
    }
  }
}

RiskGrid RiskGrid::concat(const RiskGrid& other) const {
  if (other.lambdas_ != lambdas_ || other.bound_ != bound_ ||
      other.monotonicity_ != monotonicity_) {
    throw std::domain_error("risk grids do not share lambdas, bound and direction");
  }
  std::vector<double> losses = losses_;
  losses.insert(losses.end(), other.losses_.begin(), other.losses_.end());
  return RiskGrid(lambdas_, std::move(losses), bound_, monotonicity_);
}

Direction RiskGrid::action_direction() const {
  return monotonicity_ == LossMonotonicity::NonIncreasing
             ? Direction::LargerIsMoreConservative
             : Direction::SmallerIsMoreConservative;
}

ThresholdAction crc_lambda(const RiskGrid& grid, double alpha) {
  require_level(alpha, "alpha");
  const std::size_t L = grid.lambdas().size();
  std::vector<double> sums(L, 0.0);
  for (std::size_t i = 0; i < grid.points(); ++i) {
    const auto row = grid.row(i);
    for (std::size_t j = 0; j < L; ++j) sums[j] += row[j];
  }
  const double denom = static_cast<double>(grid.points()) + 1.0;
  auto feasible = [&](std::size_t j) {
    return (sums[j] + grid.bound()) / denom <= alpha;
  };

  const Direction dir = grid.action_direction();
  if (grid.monotonicity() == LossMonotonicity::NonIncreasing) {
    for (std::size_t j = 0; j < L; ++j) {
      if (feasible(j)) return {grid.lambdas()[j], dir};
    }
    return {grid.lambdas().back(), dir};
  }
  for (std::size_t j = L; j-- > 0;) {
    if (feasible(j)) return {grid.lambdas()[j], dir};
  }
  return {grid.lambdas().front(), dir};
}

ThresholdAction gespi_crc(const RiskGrid& real, const RiskGrid& pooled,
                          const GespiConfig& cfg) {
  cfg.validate();
  if (real.lambdas().size() != pooled.lambdas().size() ||
      !std::equal(real.lambdas().begin(), real.lambdas().end(),
                  pooled.lambdas().begin()) ||
      real.monotonicity() != pooled.monotonicity() ||
      real.bound() != pooled.bound()) {
    throw std::domain_error("real and pooled risk grids differ");
  }
  if (pooled.points() < real.points()) {
    throw std::domain_error("pooled grid has fewer rows than the real grid");
  }
  return combine(cfg.variant, crc_lambda(real, cfg.alpha),
                 crc_lambda(pooled, cfg.alpha),
                 crc_lambda(real, cfg.alpha + cfg.epsilon))
      .action;
}

namespace {

std::size_t pooled_cutoff(std::size_t n, std::size_t N, double alpha) {
  const std::size_t K =
      robust_ceil((1.0 - alpha) * static_cast<double>(N + n + 1));
  return std::min(K, N + n);
}

// Exact probability as a rational, for small pools.
boost::multiprecision::cpp_rational exact_rank_probability(std::size_t n,
                                                           std::size_t N,
                                                           std::size_t r,
                                                           std::size_t K) {
  using boost::multiprecision::cpp_int;
  cpp_int numerator = 0;
  for (std::size_t k = r; k <= K; ++k) {
    numerator += exact_choose(k - 1, r - 1) * exact_choose(N + n - k, n - r);
  }
  return boost::multiprecision::cpp_rational(numerator, exact_choose(N + n, n));
}

constexpr std::size_t kExactPoolLimit = 64;

}  // namespace

double guardrail_rank_probability(std::size_t n, std::size_t N, std::size_t r,
                                  double alpha) {
  require_level(alpha, "alpha");
  if (n == 0 || r < 1 || r > n) {
    throw std::domain_error("guardrail rank must lie in {1..n}");
  }
  const std::size_t K = pooled_cutoff(n, N, alpha);
  if (N + n <= kExactPoolLimit) {
    return exact_rank_probability(n, N, r, K).convert_to<double>();
  }
  const double log_den = log_choose(N + n, n);
  double total = 0.0;
  for (std::size_t k = r; k <= K; ++k) {
    total += std::exp(log_choose(k - 1, r - 1) + log_choose(N + n - k, n - r) -
                      log_den);
  }
  return std::min(total, 1.0);
}

EpsilonFromDelta epsilon_from_delta(std::size_t n, std::size_t N, double alpha,
                                    double delta) {
  require_level(alpha, "alpha");
  if (n < 1 || N < 1) throw std::domain_error("epsilon_from_delta needs n, N >= 1");
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw std::domain_error("delta must lie in [0, 1]");
  }
  const std::size_t K = pooled_cutoff(n, N, alpha);
  const bool exact = N + n <= kExactPoolLimit;
  const boost::multiprecision::cpp_rational target =
      boost::multiprecision::cpp_rational(1) -
      boost::multiprecision::cpp_rational(delta);

  // The probability is nonincreasing in r, so scan down from the top.
  double best_seen = 0.0;
  for (std::size_t r = n; r >= 1; --r) {
    bool ok = false;
    double prob = 0.0;
    if (exact) {
      const auto p = exact_rank_probability(n, N, r, K);
      ok = p >= target;
      prob = p.convert_to<double>();
    } else {
      prob = guardrail_rank_probability(n, N, r, alpha);
      ok = prob >= 1.0 - delta - kBoundaryTolerance;
    }
    best_seen = std::max(best_seen, prob);
    if (ok) {
      const double epsilon =
          1.0 - alpha - static_cast<double>(r) / static_cast<double>(n + 1);
      return {r, epsilon, prob};
    }
  }
  throw std::domain_error(
      "no guardrail rank reaches probability 1 - delta; maximal probability " +
      std::to_string(best_seen));
}

}  // namespace gespi
