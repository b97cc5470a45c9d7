#include "gespi/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gespi {

double log_choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return -std::numeric_limits<double>::infinity();
  const auto nn = static_cast<double>(n);
  const auto kk = static_cast<double>(k);
  return std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) -
         std::lgamma(nn - kk + 1.0);
}

std::vector<double> binomial_pmf(std::uint64_t n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error("binomial probability outside [0, 1]");
  }
  std::vector<double> pmf(n + 1, 0.0);
  if (p == 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  if (p == 1.0) {
    pmf[n] = 1.0;
    return pmf;
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  for (std::uint64_t k = 0; k <= n; ++k) {
    pmf[k] = std::exp(log_choose(n, k) + static_cast<double>(k) * lp +
                      static_cast<double>(n - k) * lq);
  }
  return pmf;
}

std::vector<double> binomial_upper_tail(const std::vector<double>& pmf) {
  std::vector<double> upper(pmf.size() + 1, 0.0);
  for (std::size_t k = pmf.size(); k-- > 0;) upper[k] = upper[k + 1] + pmf[k];
  return upper;
}

boost::multiprecision::cpp_int exact_choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  boost::multiprecision::cpp_int result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result *= n - k + i;
    result /= i;
  }
  return result;
}

std::uint64_t robust_ceil(double x) {
  if (!(x >= 0.0)) throw std::domain_error("robust_ceil needs x >= 0");
  const double nearest = std::round(x);
  if (std::fabs(x - nearest) <= 1e-9 * std::max(1.0, x)) {
    return static_cast<std::uint64_t>(nearest);
  }
  return static_cast<std::uint64_t>(std::ceil(x));
}

}  // namespace gespi
