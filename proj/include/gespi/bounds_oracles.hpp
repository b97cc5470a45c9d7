#pragma once

// Exact and brute-force companions to the inference procedures: total
// variation distances, the Pinsker-type bound for the median test, order
// statistic laws, the rank distribution behind epsilon_from_delta, and a
// Monte-Carlo estimate of the guardrail bias term tau.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gespi/combinator.hpp"
#include "gespi/random.hpp"

namespace gespi {

/// Finite distribution on a strictly increasing support.
class DiscreteDist {
 public:
  DiscreteDist(std::vector<double> support, std::vector<double> probs);

  std::span<const double> support() const { return support_; }
  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return support_.size(); }

  double sample(Rng& rng) const;

 private:
  std::vector<double> support_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

/// Exact TV distance between Binom(n, p) and Binom(n, q).
double tv_binomial(std::uint64_t n, double p, double q);

/// sqrt(n / (2 q (1 - q))) * |p - q|.
double pinsker_bound(std::uint64_t n, double p, double q);

/// TV distance between two discrete distributions (supports are merged).
double tv_distance(const DiscreteDist& p, const DiscreteDist& q);

/// Law of the r-th order statistic of n iid draws from base.
DiscreteDist order_statistic_dist(const DiscreteDist& base, std::size_t n, std::size_t r);

/// (1/(n+1)) * sum_{r=1}^{n+1} TV(P_(r), Q_(r)) with order statistics of n+1 draws.
double conformal_gap_bound(const DiscreteDist& p, const DiscreteDist& q, std::size_t n);

/// Exact P(rank of the r-th smallest real score within the pooled sample = k),
/// k = 1..N+n, for iid continuous scores. Index k-1 holds rank k.
std::vector<double> rank_pmf_exact(std::size_t n, std::size_t N, std::size_t r);

/// Empirical pmf (index k-1 for rank k) of the pooled rank of the r-th
/// smallest of n real draws among n + N iid uniform draws.
std::vector<double> rank_distribution_oracle(std::size_t n, std::size_t N,
                                             std::size_t r, std::size_t trials,
                                             std::uint64_t seed,
                                             unsigned workers = 1);

/// Same simulation, all r at once: counts[r-1][k-1] = #{trials with rank k}.
std::vector<std::vector<std::uint64_t>> rank_count_table(std::size_t n, std::size_t N,
                                                         std::size_t trials,
                                                         std::uint64_t seed,
                                                         unsigned workers = 1);

struct TauEstimate {
  double tau = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

/// Monte-Carlo estimate of tau = 1 - P(A_alpha(D) ⪯ A_alpha(D ∪ D~) ⪯ A_{alpha+eps}(D))
/// with all n + N records drawn iid from sampler.
template <class Record>
TauEstimate estimate_tau(const BaseProcedure<Record>& proc,
                         const std::function<Record(Rng&)>& sampler, std::size_t n,
                         std::size_t N, double alpha, double epsilon,
                         std::size_t trials, std::uint64_t seed) {
  GespiConfig{alpha, epsilon}.validate();
  if (trials == 0) throw std::domain_error("estimate_tau needs trials >= 1");
  if (n == 0) throw std::domain_error("estimate_tau needs n >= 1");
  std::size_t sandwiched = 0;
  std::vector<Record> pooled(n + N);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, {t});
    for (auto& rec : pooled) rec = sampler(rng);
    const std::span<const Record> all(pooled);
    const auto real = all.first(n);
    const GespiStreams streams = gespi_streams(derive_seed(seed, {t, 1}));
    const PartialAction base = proc.run(real, alpha, streams.real);
    const PartialAction guard = proc.run(real, alpha + epsilon, streams.real);
    const PartialAction pool = proc.run(all, alpha, streams.pooled);
    if (leq(base, pool) && leq(pool, guard)) ++sandwiched;
  }
  const double tau = 1.0 - static_cast<double>(sandwiched) / static_cast<double>(trials);
  return {tau, std::sqrt(tau * (1.0 - tau) / static_cast<double>(trials)), trials};
}

}  // namespace gespi
