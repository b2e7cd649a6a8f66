#include <gtest/gtest.h>

#include <random>

#include "l2d/divergence.hpp"
#include "oracles/reference.hpp"
#include "test_support.hpp"

namespace l2d {
namespace {

TEST(Midpoint, Examples) {
  EXPECT_EQ(midpoint({1, 0}, {0, 1}), LabelDistribution({0.5, 0.5}));
  const auto m = midpoint({0.8, 0.2}, {0.6, 0.4});
  EXPECT_DOUBLE_EQ(m[0], 0.7);
  EXPECT_DOUBLE_EQ(m[1], 0.3);
  const LabelDistribution p{0.1, 0.6, 0.3};
  EXPECT_EQ(midpoint(p, p), p);
}

TEST(Midpoint, RejectsClassCountMismatch) {
  EXPECT_THROW(midpoint({0.5, 0.5}, {0.2, 0.3, 0.5}), ClassCountError);
}

TEST(LabelDistribution, RejectsInvalidVectors) {
  EXPECT_THROW(LabelDistribution({1.0}), InvalidArgument);
  EXPECT_THROW(LabelDistribution({0.7, 0.2}), InvalidArgument);
  EXPECT_THROW(LabelDistribution({1.2, -0.2}), InvalidArgument);
  EXPECT_NO_THROW(LabelDistribution({0.5, 0.5 + 5e-10}));
}

TEST(KlDivergence, Examples) {
  EXPECT_DOUBLE_EQ(kl_divergence({1, 0}, {0.5, 0.5}), 1.0);
  const LabelDistribution p{0.25, 0.25, 0.5};
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  // 0.8*log2(8/7) + 0.2*log2(2/3), evaluated at 40 digits.
  EXPECT_NEAR(kl_divergence({0.8, 0.2}, {0.7, 0.3}), 0.03712356220968547776, 1e-15);
}

TEST(KlDivergence, RejectsMissingSupport) {
  EXPECT_THROW(kl_divergence({0.5, 0.5}, {1.0, 0.0}), ContinuityError);
  EXPECT_THROW(kl_divergence({0.5, 0.5}, {0.2, 0.3, 0.5}), ClassCountError);
}

TEST(JsDivergence, Examples) {
  EXPECT_EQ(js_divergence({1, 0}, {0, 1}), 1.0);
  const LabelDistribution p{0.3, 0.7};
  EXPECT_EQ(js_divergence(p, p), 0.0);
  EXPECT_NEAR(js_divergence({0.8, 0.2}, {0.6, 0.4}), 0.03485155455967712479, 1e-15);
  EXPECT_THROW(js_divergence({0.5, 0.5}, {0.2, 0.3, 0.5}), ClassCountError);
}

TEST(LabelMatchScore, Examples) {
  const LabelDistribution p{0.3, 0.7};
  EXPECT_EQ(label_match_score(p, p), 1.0);
  EXPECT_EQ(label_match_score({1, 0}, {0, 1}), 0.0);
  EXPECT_NEAR(label_match_score({0.8, 0.2}, {0.6, 0.4}), 0.96514844544032287521, 1e-15);
}

TEST(JsDivergence, RandomPairProperties) {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<std::size_t> classes(2, 10);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = classes(gen);
    const double sparsity = trial % 3 == 0 ? 0.4 : 0.0;
    const auto pv = testing_support::random_distribution(gen, n, sparsity);
    const auto qv = testing_support::random_distribution(gen, n, sparsity);
    const LabelDistribution p(pv), q(qv);

    const double pq = js_divergence(p, q);
    EXPECT_EQ(pq, js_divergence(q, p));
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0);
    EXPECT_EQ(label_match_score(p, q) + pq, 1.0);
    EXPECT_GE(kl_divergence(p, midpoint(p, q)), 0.0);
    EXPECT_NEAR(pq, oracle::jsd_entropy_form(pv, qv), 1e-10);
    EXPECT_EQ(js_divergence(p, p), 0.0);
  }
}

TEST(JsDivergence, IdentityOfIndiscernibles) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto pv = testing_support::random_distribution(gen, 2 + trial % 9);
    auto qv = pv;
    // Move 1e-10 of mass between two classes: still "equal" at 1e-9.
    const double shift = std::min(1e-10, qv[1]);
    qv[0] += shift;
    qv[1] -= shift;
    EXPECT_LE(js_divergence(LabelDistribution(pv), LabelDistribution(qv)), 1e-12);

    const auto rv = testing_support::random_distribution(gen, pv.size());
    double max_diff = 0.0;
    for (std::size_t c = 0; c < pv.size(); ++c) max_diff = std::max(max_diff, std::abs(pv[c] - rv[c]));
    if (max_diff > 1e-9) {
      // Random pairs sit far apart; a near-zero JSD here would be a bug.
      EXPECT_GT(js_divergence(LabelDistribution(pv), LabelDistribution(rv)), 1e-12);
    }
  }
}

}  // namespace
}  // namespace l2d
