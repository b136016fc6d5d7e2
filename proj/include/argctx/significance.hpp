#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "argctx/error.hpp"

namespace argctx {

/// Exact two-sided paired sign-flip permutation test on the fold-wise
/// differences a_i - b_i. All 2^n sign assignments are enumerated; the
/// p-value counts assignments whose |mean| reaches the observed one.
inline double significance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("significance: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw DataError("significance: need at least two paired values");
  if (n > 30) throw DataError("significance: exact enumeration limited to 30 pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double observed = 0.0;
  for (double x : d) observed += x;
  observed = std::abs(observed);
  // Relative slack so that sums equal up to rounding count as ties.
  double scale = 0.0;
  for (double x : d) scale += std::abs(x);
  const double tol = 1e-12 * std::max(scale, 1e-300);
  const std::uint64_t flips = 1ULL << n;
  std::uint64_t extreme = 0;
  for (std::uint64_t mask = 0; mask < flips; ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1U) ? -d[i] : d[i];
    if (std::abs(s) >= observed - tol) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(flips);
}

}  // namespace argctx
