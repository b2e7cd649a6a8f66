#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "l2d/error.hpp"

namespace l2d {

/// Zero variance of the paired differences: t is undefined.
class DegenerateDataError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct TTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;  ///< two-sided
  std::size_t df = 0;
};

/// Paired t-test on per-seed accuracies, a[i] paired with b[i].
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("paired_t_test: sample lengths differ (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  const std::size_t n = a.size();
  if (n < 2) throw InvalidArgument("paired_t_test: need at least 2 pairs");

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  // Differences that are "constant" up to rounding count as constant.
  if (!(var > 1e-24 * std::max(1.0, mean * mean))) {
    throw DegenerateDataError("paired_t_test: differences have zero variance");
  }
  const double t = mean / std::sqrt(var / static_cast<double>(n));
  boost::math::students_t dist(static_cast<double>(n - 1));
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return {t, std::min(p, 1.0), n - 1};
}

}  // namespace l2d
