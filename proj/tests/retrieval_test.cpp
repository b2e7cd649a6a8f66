#include <gtest/gtest.h>

#include <random>

#include "l2d/retrieval.hpp"
#include "oracles/reference.hpp"

namespace l2d {
namespace {

EmbeddingStore random_store(std::mt19937_64& gen, std::size_t size, std::size_t dim) {
  std::normal_distribution<double> normal;
  EmbeddingStore store;
  for (std::size_t i = 0; i < size; ++i) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(gen);
    store.add("id" + std::to_string(i), EmbeddingVector(std::move(v)));
  }
  return store;
}

TEST(CosineSimilarity, Examples) {
  const EmbeddingVector v{0.3, -1.7, 2.2};
  EXPECT_EQ(cosine_similarity(v, v), 1.0);
  EXPECT_EQ(cosine_similarity({1, 0}, {0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity({1, 1, 0}, {1, 0, 0}), 0.70710678118654752, 1e-15);
}

TEST(CosineSimilarity, Errors) {
  EXPECT_THROW(cosine_similarity({1, 0}, {1, 0, 0}), InvalidArgument);
  EXPECT_THROW(EmbeddingVector({0.0, 0.0}), InvalidArgument);
  EXPECT_THROW(cosine_similarity(EmbeddingVector{}, EmbeddingVector{}), InvalidArgument);
}

TEST(RetrieveTopK, WorkedExample) {
  EmbeddingStore store;
  store.add("a", {1, 0});
  store.add("b", {0, 1});
  store.add("c", {0.9, 0.1});
  const auto pool = retrieve_topk("q", {1, 0}, store, 2);
  ASSERT_EQ(pool.size(), 2u);
  EXPECT_EQ(pool.test_id, "q");
  EXPECT_EQ(pool.entries[0].train_id, "a");
  EXPECT_EQ(pool.entries[0].s_text, 1.0);
  EXPECT_EQ(pool.entries[1].train_id, "c");
  // 0.9 / sqrt(0.82)
  EXPECT_NEAR(pool.entries[1].s_text, 0.99388373467361890, 1e-15);
}

TEST(RetrieveTopK, DegenerateK) {
  EmbeddingStore store;
  store.add("a", {1, 0});
  store.add("b", {0, 1});
  store.add("c", {-1, 0.2});
  const auto pool = retrieve_topk("q", {1, 0.5}, store, 10);
  ASSERT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool.entries[0].train_id, "a");
  EXPECT_EQ(pool.entries[1].train_id, "b");
  EXPECT_EQ(pool.entries[2].train_id, "c");
}

TEST(RetrieveTopK, TiesBreakByAscendingId) {
  EmbeddingStore store;
  store.add("zeta", {1, 1});
  store.add("alpha", {2, 2});
  store.add("mid", {3, 3});
  const auto pool = retrieve_topk("q", {1, 1}, store, 3);
  EXPECT_EQ(pool.entries[0].train_id, "alpha");
  EXPECT_EQ(pool.entries[1].train_id, "mid");
  EXPECT_EQ(pool.entries[2].train_id, "zeta");
}

TEST(RetrieveTopK, Errors) {
  EmbeddingStore empty;
  EXPECT_THROW(retrieve_topk("q", {1, 0}, empty, 1), InvalidArgument);
  EmbeddingStore store;
  store.add("a", {1, 0});
  EXPECT_THROW(retrieve_topk("q", {1, 0, 0}, store, 1), InvalidArgument);
  EXPECT_THROW(retrieve_topk("q", {1, 0}, store, 0), InvalidArgument);
  EXPECT_THROW(store.add("a", {0, 1}), InvalidArgument);
  EXPECT_THROW(store.add("b", {0, 1, 1}), InvalidArgument);
}

TEST(RetrieveTopK, MatchesNaiveSortAndPrefixes) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t dim = 4 + trial;
    const auto store = random_store(gen, 10 + 5 * trial, dim);
    std::normal_distribution<double> normal;
    std::vector<double> qv(dim);
    for (auto& x : qv) x = normal(gen);
    const EmbeddingVector q(qv);

    std::vector<std::pair<std::string, double>> all;
    for (std::size_t i = 0; i < store.size(); ++i) {
      const auto v = store.vector(i).values();
      const double ref = static_cast<double>(oracle::cosine(qv, {v.begin(), v.end()}));
      const double got = cosine_similarity(q, store.vector(i));
      ASSERT_NEAR(got, ref, 1e-12);
      all.emplace_back(store.id(i), got);
    }
    const auto expected = oracle::naive_sort(all);
    const std::size_t k = 1 + trial % 12;
    const auto pool = retrieve_topk("q", q, store, k);
    ASSERT_EQ(pool.size(), std::min(k, store.size()));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      EXPECT_EQ(pool.entries[i].train_id, expected[i].first);
    }
    const auto longer = retrieve_topk("q", q, store, k + 1);
    for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_EQ(pool.entries[i], longer.entries[i]);
    EXPECT_EQ(pool, retrieve_topk("q", q, store, k));
  }
}

}  // namespace
}  // namespace l2d
