#pragma once

// Test-only reference implementations. They deliberately take different
// numerical routes from the engine (entropy form of JSD, long double,
// quadrature for the t distribution) and must not include engine headers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// JSD in bits via H(M) - (H(P) + H(Q)) / 2, natural logs in long double.
inline double jsd_entropy_form(const std::vector<double>& p, const std::vector<double>& q) {
  auto h = [](long double x) { return x > 0 ? -x * std::log(x) : 0.0L; };
  long double hm = 0, hp = 0, hq = 0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const long double m = (static_cast<long double>(p[c]) + q[c]) / 2;
    hm += h(m);
    hp += h(p[c]);
    hq += h(q[c]);
  }
  return static_cast<double>((hm - (hp + hq) / 2) / std::log(2.0L));
}

inline double kl_bits(const std::vector<double>& p, const std::vector<double>& m) {
  long double s = 0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] > 0) s += static_cast<long double>(p[c]) * std::log(static_cast<long double>(p[c]) / m[c]);
  }
  return static_cast<double>(s / std::log(2.0L));
}

inline long double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Every (id, similarity) pair, fully sorted: similarity desc, id asc.
/// Similarities are recomputed by the engine-independent formula but sorted
/// on the caller-supplied values so ties resolve identically.
inline std::vector<std::pair<std::string, double>> naive_sort(
    std::vector<std::pair<std::string, double>> all) {
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  return all;
}

/// Two-sided p-value: 1 - 2 * integral_0^|t| pdf, by composite Simpson with
/// many panels.
inline double t_two_sided_p(double t, double df) {
  const long double nu = df;
  const long double b = std::fabs(t);
  if (b == 0) return 1.0;
  const long double c = std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) /
                        std::sqrt(nu * 3.14159265358979323846264338327950288L);
  auto pdf = [&](long double x) { return c * std::pow(1 + x * x / nu, -(nu + 1) / 2); };
  const int n = 200000;  // even
  const long double h = b / n;
  long double s = pdf(0) + pdf(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
  return static_cast<double>(1 - 2 * (s * h / 3));
}

struct TTest {
  double t;
  double p;
};

/// Textbook paired t: mean difference over its standard error.
inline TTest paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  long double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i];
    sum += d;
    sum_sq += d * d;
  }
  const long double mean = sum / n;
  const long double var = (sum_sq - n * mean * mean) / (n - 1);
  const double t = static_cast<double>(mean / std::sqrt(var / n));
  return {t, t_two_sided_p(t, static_cast<double>(n - 1))};
}

}  // namespace oracle
