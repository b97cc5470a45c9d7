#include "gespi/bounds_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gespi/numerics.hpp"
#include "gespi/parallel.hpp"

namespace gespi {

namespace {

constexpr double kNormalizationTolerance = 1e-12;

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error(std::string(what) + " must lie in [0, 1], got " +
                            std::to_string(p));
  }
}

// P(Binom(n, f) >= r).
double binomial_at_least(std::size_t n, double f, std::size_t r) {
  if (f >= 1.0) return 1.0;
  if (f <= 0.0) return r == 0 ? 1.0 : 0.0;
  return binomial_upper_tail(binomial_pmf(n, f))[r];
}

}  // namespace

DiscreteDist::DiscreteDist(std::vector<double> support, std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
  if (support_.empty()) throw std::domain_error("discrete distribution has empty support");
  if (support_.size() != probs_.size()) {
    throw std::domain_error("support and probabilities differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (!std::isfinite(support_[i])) throw std::domain_error("support value not finite");
    if (i > 0 && !(support_[i] > support_[i - 1])) {
      throw std::domain_error("support must be strictly increasing");
    }
    if (!(probs_[i] >= 0.0)) throw std::domain_error("negative probability");
    total += probs_[i];
  }
  if (std::fabs(total - 1.0) > kNormalizationTolerance) {
    throw std::domain_error("probabilities sum to " + std::to_string(total));
  }
  cdf_.resize(probs_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) cdf_[i] = (acc += probs_[i]);
  cdf_.back() = 1.0;
}

double DiscreteDist::sample(Rng& rng) const {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto idx = static_cast<std::size_t>(
      std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  return support_[idx];
}

double tv_binomial(std::uint64_t n, double p, double q) {
  require_probability(p, "p");
  require_probability(q, "q");
  const auto a = binomial_pmf(n, p);
  const auto b = binomial_pmf(n, q);
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += std::fabs(a[k] - b[k]);
  return std::min(0.5 * sum, 1.0);
}

double pinsker_bound(std::uint64_t n, double p, double q) {
  require_probability(p, "p");
  if (!(q > 0.0 && q < 1.0)) {
    throw std::domain_error("pinsker bound needs q in (0, 1), got " + std::to_string(q));
  }
  return std::sqrt(static_cast<double>(n) / (2.0 * q * (1.0 - q))) * std::fabs(p - q);
}

double tv_distance(const DiscreteDist& p, const DiscreteDist& q) {
  const auto sp = p.support();
  const auto sq = q.support();
  const auto pp = p.probs();
  const auto pq = q.probs();
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < sp.size() || j < sq.size()) {
    if (j == sq.size() || (i < sp.size() && sp[i] < sq[j])) {
      sum += pp[i++];
    } else if (i == sp.size() || sq[j] < sp[i]) {
      sum += pq[j++];
    } else {
      sum += std::fabs(pp[i++] - pq[j++]);
    }
  }
  return std::min(0.5 * sum, 1.0);
}

DiscreteDist order_statistic_dist(const DiscreteDist& base, std::size_t n, std::size_t r) {
  if (r < 1 || r > n) {
    throw std::domain_error("order statistic index must lie in {1..n}, got r = " +
                            std::to_string(r) + ", n = " + std::to_string(n));
  }
  const auto probs = base.probs();
  std::vector<double> out(probs.size());
  double cdf = 0.0;
  double previous = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cdf = i + 1 == probs.size() ? 1.0 : std::min(cdf + probs[i], 1.0);
    const double g = binomial_at_least(n, cdf, r);
    out[i] = std::max(g - previous, 0.0);
    previous = g;
  }
  // Renormalize away rounding so the result passes the constructor check.
  double total = 0.0;
  for (double v : out) total += v;
  for (double& v : out) v /= total;
  return DiscreteDist(std::vector<double>(base.support().begin(), base.support().end()),
                      std::move(out));
}

double conformal_gap_bound(const DiscreteDist& p, const DiscreteDist& q, std::size_t n) {
  double sum = 0.0;
  for (std::size_t r = 1; r <= n + 1; ++r) {
    sum += tv_distance(order_statistic_dist(p, n + 1, r), order_statistic_dist(q, n + 1, r));
  }
  return sum / static_cast<double>(n + 1);
}

std::vector<double> rank_pmf_exact(std::size_t n, std::size_t N, std::size_t r) {
  if (r < 1 || r > n) throw std::domain_error("rank index must lie in {1..n}");
  const std::size_t total = N + n;
  const double log_den = log_choose(total, n);
  std::vector<double> pmf(total, 0.0);
  for (std::size_t k = r; k <= total - (n - r); ++k) {
    pmf[k - 1] =
        std::exp(log_choose(k - 1, r - 1) + log_choose(total - k, n - r) - log_den);
  }
  return pmf;
}

std::vector<std::vector<std::uint64_t>> rank_count_table(std::size_t n, std::size_t N,
                                                         std::size_t trials,
                                                         std::uint64_t seed,
                                                         unsigned workers) {
  if (n == 0) throw std::domain_error("rank oracle needs n >= 1");
  if (trials == 0) throw std::domain_error("rank oracle needs trials >= 1");
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  const std::size_t width = N + n;

  // Each chunk owns a full table; tables are summed in chunk order.
  std::vector<std::vector<std::uint64_t>> partial(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    auto& table = partial[c];
    table.assign(n * width, 0);
    std::vector<double> reals(n);
    std::vector<std::size_t> below(n + 1);
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(trials, begin + kChunk);
    for (std::size_t t = begin; t < end; ++t) {
      Rng rng = make_rng(seed, {t});
      for (double& x : reals) x = uniform01(rng);
      std::sort(reals.begin(), reals.end());
      std::fill(below.begin(), below.end(), 0);
      for (std::size_t j = 0; j < N; ++j) {
        const double y = uniform01(rng);
        ++below[static_cast<std::size_t>(std::upper_bound(reals.begin(), reals.end(), y) -
                                         reals.begin())];
      }
      // below[g] counts synthetic draws in the g-th gap; the r-th real ranks
      // after r - 1 reals and every synthetic draw in gaps 0..r-1.
      std::size_t synth_before = 0;
      for (std::size_t r = 1; r <= n; ++r) {
        synth_before += below[r - 1];
        ++table[(r - 1) * width + (r + synth_before - 1)];
      }
    }
  });

  std::vector<std::vector<std::uint64_t>> counts(n, std::vector<std::uint64_t>(width, 0));
  for (const auto& table : partial) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < width; ++k) counts[r][k] += table[r * width + k];
    }
  }
  return counts;
}

std::vector<double> rank_distribution_oracle(std::size_t n, std::size_t N,
                                             std::size_t r, std::size_t trials,
                                             std::uint64_t seed, unsigned workers) {
  if (r < 1 || r > n) throw std::domain_error("rank index must lie in {1..n}");
  const auto counts = rank_count_table(n, N, trials, seed, workers);
  std::vector<double> pmf(counts[r - 1].size());
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    pmf[k] = static_cast<double>(counts[r - 1][k]) / static_cast<double>(trials);
  }
  return pmf;
}

}  // namespace gespi
