#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gespi/combinator.hpp"
#include "gespi/order_lattice.hpp"

namespace gespi {

/// p-values for hypotheses 1..m, each in (0, 1].
class PValueVector {
 public:
  explicit PValueVector(std::vector<double> pvalues);

  std::span<const double> values() const { return pvalues_; }
  std::size_t m() const { return pvalues_.size(); }

 private:
  std::vector<double> pvalues_;
};

/// Simes-Hochberg step-up: with sorted p_(1) <= ... <= p_(m), reject the k
/// smallest for the largest k with p_(k) <= alpha / (m - k + 1). Equal
/// p-values are ordered by hypothesis index.
RejectionSet hochberg(const PValueVector& pv, double alpha);

/// Generalized Bonferroni k-FWER rule: {j : p_j <= k * alpha / m}.
RejectionSet bonferroni_kfwer(const PValueVector& pv, double alpha, std::size_t k);

struct FwerRule {
  enum class Kind { Hochberg, BonferroniKFwer };
  Kind kind = Kind::Hochberg;
  std::size_t k = 1;

  RejectionSet apply(const PValueVector& pv, double alpha) const;
};

/// GESPI rejection set: rule(real, alpha) ∪ (rule(pooled, alpha) ∩ rule(guard, alpha + epsilon)).
RejectionSet gespi_multiple(const PValueVector& pv_real_alpha,
                            const PValueVector& pv_pooled_alpha,
                            const PValueVector& pv_real_guard, double alpha,
                            double epsilon, const FwerRule& rule);

/// Base procedure over calibration scores: conformal p-values of the fixed
/// test scores followed by the given FWER rule.
BaseProcedure<double> conformal_fwer_procedure(std::vector<double> test_scores,
                                               FwerRule rule = {});

}  // namespace gespi
