#include "gespi/multiple_testing.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gespi/conformal.hpp"

namespace gespi {

namespace {

void require_level(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

}  // namespace

PValueVector::PValueVector(std::vector<double> pvalues) : pvalues_(std::move(pvalues)) {
  if (pvalues_.empty()) throw std::domain_error("p-value vector is empty");
  for (std::size_t j = 0; j < pvalues_.size(); ++j) {
    if (!(pvalues_[j] > 0.0 && pvalues_[j] <= 1.0)) {
      throw std::domain_error("p-value of hypothesis " + std::to_string(j + 1) +
                              " outside (0, 1]");
    }
  }
}

RejectionSet hochberg(const PValueVector& pv, double alpha) {
  require_level(alpha);
  const auto p = pv.values();
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  std::size_t reject_count = 0;
  for (std::size_t k = m; k >= 1; --k) {
    if (p[order[k - 1]] <= alpha / static_cast<double>(m - k + 1)) {
      reject_count = k;
      break;
    }
  }
  std::vector<std::size_t> members;
  members.reserve(reject_count);
  for (std::size_t i = 0; i < reject_count; ++i) members.push_back(order[i] + 1);
  return RejectionSet(m, std::move(members));
}

RejectionSet bonferroni_kfwer(const PValueVector& pv, double alpha, std::size_t k) {
  require_level(alpha);
  const std::size_t m = pv.m();
  if (k < 1 || k > m) {
    throw std::domain_error("k-FWER needs 1 <= k <= m, got k = " + std::to_string(k));
  }
  const double cutoff = static_cast<double>(k) * alpha / static_cast<double>(m);
  std::vector<std::size_t> members;
  for (std::size_t j = 0; j < m; ++j) {
    if (pv.values()[j] <= cutoff) members.push_back(j + 1);
  }
  return RejectionSet(m, std::move(members));
}

RejectionSet FwerRule::apply(const PValueVector& pv, double alpha) const {
  return kind == Kind::Hochberg ? hochberg(pv, alpha) : bonferroni_kfwer(pv, alpha, k);
}

RejectionSet gespi_multiple(const PValueVector& pv_real_alpha,
                            const PValueVector& pv_pooled_alpha,
                            const PValueVector& pv_real_guard, double alpha,
                            double epsilon, const FwerRule& rule) {
  GespiConfig{alpha, epsilon}.validate();
  if (pv_real_alpha.m() != pv_pooled_alpha.m() || pv_real_alpha.m() != pv_real_guard.m()) {
    throw std::domain_error("p-value vectors have different m");
  }
  return gespi_rejection_set(rule.apply(pv_real_alpha, alpha),
                             rule.apply(pv_pooled_alpha, alpha),
                             rule.apply(pv_real_guard, alpha + epsilon));
}

BaseProcedure<double> conformal_fwer_procedure(std::vector<double> test_scores,
                                               FwerRule rule) {
  if (test_scores.empty()) throw std::domain_error("no test scores");
  return {[scores = std::move(test_scores), rule](std::span<const double> cal, double level,
                                                  std::uint64_t) -> PartialAction {
            return rule.apply(PValueVector(conformal_pvalues(cal, scores)), level);
          },
          true};
}

}  // namespace gespi
