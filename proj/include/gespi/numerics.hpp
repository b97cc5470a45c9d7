#pragma once

// Shared combinatorics. Everything is evaluated in log space; the exact_*
// helpers use arbitrary-precision integers and exist to verify the log-space
// results at small sizes.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace gespi {

/// Tolerance used when a floating comparison must reproduce an exact
/// combinatorial boundary (CDF equal to a level, tail equal to alpha).
inline constexpr double kBoundaryTolerance = 1e-12;

double log_choose(std::uint64_t n, std::uint64_t k);

/// pmf of Binom(n, p) for k = 0..n. p may be 0 or 1.
std::vector<double> binomial_pmf(std::uint64_t n, double p);

/// upper[k] = P(W >= k) for k = 0..n+1 (upper[n+1] = 0), summed from the top.
std::vector<double> binomial_upper_tail(const std::vector<double>& pmf);

boost::multiprecision::cpp_int exact_choose(std::uint64_t n, std::uint64_t k);

/// ceil(x) that ignores representation noise just above an integer.
std::uint64_t robust_ceil(double x);

}  // namespace gespi
