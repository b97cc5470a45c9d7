#include "gespi/combinator.hpp"

#include <string>

#include "gespi/conformal.hpp"

namespace gespi {

void GespiConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("alpha must lie in (0, 1), got " +
                            std::to_string(alpha));
  }
  if (!(epsilon >= 0.0)) {
    throw std::domain_error("epsilon must be nonnegative, got " +
                            std::to_string(epsilon));
  }
  if (!(alpha + epsilon < 1.0)) {
    throw std::domain_error("alpha + epsilon must be below 1");
  }
}

ThresholdAction gespi_conformal_threshold(std::span<const double> real_scores,
                                          std::span<const double> synth_scores,
                                          const GespiConfig& cfg) {
  cfg.validate();
  if (real_scores.empty()) {
    throw std::domain_error("GESPI conformal threshold needs real scores");
  }
  std::vector<double> pooled(real_scores.begin(), real_scores.end());
  pooled.insert(pooled.end(), synth_scores.begin(), synth_scores.end());

  return combine(cfg.variant, conformal_quantile(real_scores, cfg.alpha),
                 conformal_quantile(pooled, cfg.alpha),
                 conformal_quantile(real_scores, cfg.alpha + cfg.epsilon))
      .action;
}

RejectionSet gespi_rejection_set(const RejectionSet& real,
                                 const RejectionSet& pooled,
                                 const RejectionSet& guard) {
  return join(real, meet(pooled, guard));
}

}  // namespace gespi
