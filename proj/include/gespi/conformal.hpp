#pragma once

// Split conformal prediction, conformal p-values and conformal risk control.

#include <cstddef>
#include <span>
#include <vector>

#include "gespi/combinator.hpp"
#include "gespi/order_lattice.hpp"

namespace gespi {

/// Nonconformity scores; construction rejects NaN and infinities.
class ScoreSample {
 public:
  ScoreSample() = default;
  explicit ScoreSample(std::vector<double> scores);

  std::span<const double> values() const { return scores_; }
  std::size_t size() const { return scores_.size(); }
  bool empty() const { return scores_.empty(); }

 private:
  std::vector<double> scores_;
};

/// ceil((1 - alpha)(n + 1)), the order-statistic index used by split conformal.
std::size_t conformal_rank(std::size_t n, double alpha);

/// k-th smallest score with k = conformal_rank(n, alpha), or +inf if k > n.
/// Direction is LargerIsMoreConservative.
ThresholdAction conformal_quantile(std::span<const double> scores, double alpha);

/// 1 iff test_score <= threshold (closed prediction set).
bool coverage_indicator(const ThresholdAction& threshold, double test_score);

/// (1 + #{cal_i >= test_score}) / (n + 1).
double conformal_pvalue(std::span<const double> cal, double test_score);

/// Conformal p-values for many test scores against one calibration set;
/// O((n + m) log n) instead of O(nm).
std::vector<double> conformal_pvalues(std::span<const double> cal,
                                      std::span<const double> test_scores);

enum class LossMonotonicity { NonIncreasing, NonDecreasing };

/// Per-datapoint losses over a grid of candidate thresholds.
///
/// losses(i, j) is the loss of datapoint i at lambdas[j]. Each row must be
/// monotone in lambda in the declared direction and lie in [0, bound].
class RiskGrid {
 public:
  RiskGrid(std::vector<double> lambdas, std::vector<double> losses,
           double bound,
           LossMonotonicity monotonicity = LossMonotonicity::NonIncreasing);

  std::span<const double> lambdas() const { return lambdas_; }
  std::size_t points() const { return points_; }
  double bound() const { return bound_; }
  LossMonotonicity monotonicity() const { return monotonicity_; }
  double loss(std::size_t point, std::size_t lambda_index) const {
    return losses_[point * lambdas_.size() + lambda_index];
  }
  std::span<const double> row(std::size_t point) const {
    return std::span<const double>(losses_).subspan(point * lambdas_.size(),
                                                    lambdas_.size());
  }

  /// Rows of this grid followed by rows of other; grids must share lambdas,
  /// bound and monotonicity.
  RiskGrid concat(const RiskGrid& other) const;

  /// Direction of the threshold action selected on this grid.
  Direction action_direction() const;

 private:
  std::vector<double> lambdas_;
  std::vector<double> losses_;
  std::size_t points_ = 0;
  double bound_;
  LossMonotonicity monotonicity_;
};

/// Least conservative grid lambda with (sum_i loss_i(lambda) + B)/(n + 1) <= alpha;
/// the most conservative grid lambda when no lambda qualifies.
ThresholdAction crc_lambda(const RiskGrid& grid, double alpha);

/// GESPI risk control. pooled must hold the real rows followed by the
/// synthetic rows on the same lambda grid.
ThresholdAction gespi_crc(const RiskGrid& real, const RiskGrid& pooled,
                          const GespiConfig& cfg);

/// Probability that the r-th smallest of n real scores ranks at most
/// ceil((1 - alpha)(N + n + 1)) within the pooled n + N scores, for iid
/// continuous scores. Hypergeometric sum, evaluated in log space.
double guardrail_rank_probability(std::size_t n, std::size_t N, std::size_t r,
                                  double alpha);

struct EpsilonFromDelta {
  std::size_t guardrail_rank;  // order-statistic index of the real guardrail
  double epsilon;
  double probability;  // guardrail_rank_probability at guardrail_rank
};

/// Guardrail slack calibrated to a secondary level delta: picks the largest
/// rank r in {1..n} with guardrail_rank_probability(n, N, r, alpha) >= 1 - delta
/// and sets epsilon so that the guardrail quantile is the r-th order statistic,
/// epsilon = 1 - alpha - r/(n + 1).
EpsilonFromDelta epsilon_from_delta(std::size_t n, std::size_t N, double alpha,
                                    double delta);

}  // namespace gespi
