#pragma once

// Label distribution arithmetic: midpoint, KL divergence to the midpoint,
// Jensen-Shannon divergence and the label matching score. Logarithms are
// base 2 so JSD lives in [0, 1].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "l2d/error.hpp"

namespace l2d {

inline constexpr double kDistributionSumTolerance = 1e-9;

/// Probability vector over the classes of a task.
///
/// Construction validates: at least two classes, no negative or non-finite
/// entry, and a total mass of 1 within `kDistributionSumTolerance`.
class LabelDistribution {
 public:
  LabelDistribution() = default;

  explicit LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.size() < 2) {
      throw InvalidArgument("label distribution needs at least 2 classes, got " +
                            std::to_string(probs_.size()));
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < probs_.size(); ++c) {
      const double v = probs_[c];
      if (!std::isfinite(v) || v < 0.0) {
        throw InvalidArgument("label distribution entry " + std::to_string(c) +
                              " is not a probability");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kDistributionSumTolerance) {
      throw InvalidArgument("label distribution sums to " + std::to_string(sum) + ", not 1");
    }
  }

  LabelDistribution(std::initializer_list<double> probs)
      : LabelDistribution(std::vector<double>(probs)) {}

  /// Point mass at `label` over `num_classes` classes (unsanitized).
  static LabelDistribution one_hot(std::size_t label, std::size_t num_classes) {
    std::vector<double> p(num_classes, 0.0);
    if (label >= num_classes) throw InvalidArgument("one-hot label out of range");
    p[label] = 1.0;
    return LabelDistribution(std::move(p));
  }

  static LabelDistribution uniform(std::size_t num_classes) {
    return LabelDistribution(
        std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)));
  }

  std::size_t num_classes() const noexcept { return probs_.size(); }
  double operator[](std::size_t c) const { return probs_[c]; }
  std::span<const double> probs() const noexcept { return probs_; }

  /// Index of the most probable class (lowest index on ties).
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) -
                                    probs_.begin());
  }

  friend bool operator==(const LabelDistribution&, const LabelDistribution&) = default;

 private:
  std::vector<double> probs_;
};

namespace detail {
inline void require_same_classes(const LabelDistribution& p, const LabelDistribution& q,
                                 const char* op) {
  if (p.num_classes() != q.num_classes()) {
    throw ClassCountError(p.num_classes(), q.num_classes(), op);
  }
}
}  // namespace detail

/// Elementwise average of two distributions.
inline LabelDistribution midpoint(const LabelDistribution& p, const LabelDistribution& q) {
  detail::require_same_classes(p, q, "midpoint");
  std::vector<double> m(p.num_classes());
  for (std::size_t c = 0; c < m.size(); ++c) m[c] = (p[c] + q[c]) / 2.0;
  return LabelDistribution(std::move(m));
}

/// KL(p || m) in bits, with 0 * log(0 / x) = 0.
inline double kl_divergence(const LabelDistribution& p, const LabelDistribution& m) {
  detail::require_same_classes(p, m, "kl_divergence");
  double sum = 0.0;
  for (std::size_t c = 0; c < p.num_classes(); ++c) {
    if (p[c] == 0.0) continue;
    if (m[c] == 0.0) {
      throw ContinuityError("kl_divergence: p[" + std::to_string(c) +
                            "] > 0 where the reference distribution is 0");
    }
    sum += p[c] * std::log2(p[c] / m[c]);
  }
  return std::max(sum, 0.0);
}

/// Jensen-Shannon divergence in bits. Symmetric, bounded by [0, 1].
inline double js_divergence(const LabelDistribution& p, const LabelDistribution& q) {
  detail::require_same_classes(p, q, "js_divergence");
  const LabelDistribution m = midpoint(p, q);
  const double jsd = 0.5 * (kl_divergence(p, m) + kl_divergence(q, m));
  return std::clamp(jsd, 0.0, 1.0);
}

/// 1 - JSD; 1 means the two distributions agree exactly.
inline double label_match_score(const LabelDistribution& p, const LabelDistribution& q) {
  return 1.0 - js_divergence(p, q);
}

}  // namespace l2d
