#pragma once

// Exact (brute-force) cosine TopK retrieval over an in-memory embedding store.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "l2d/error.hpp"

namespace l2d {

/// Dense embedding of one text. Rejects empty, non-finite and zero vectors.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidArgument("embedding vector is empty");
    for (double v : values_) {
      if (!std::isfinite(v)) throw InvalidArgument("embedding vector has a non-finite entry");
      squared_norm_ += v * v;
    }
    if (!(squared_norm_ > 0.0)) throw InvalidArgument("embedding vector has zero norm");
  }

  EmbeddingVector(std::initializer_list<double> values)
      : EmbeddingVector(std::vector<double>(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double squared_norm() const noexcept { return squared_norm_; }

 private:
  std::vector<double> values_;
  double squared_norm_ = 0.0;
};

/// Cosine similarity, clamped to [-1, 1].
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument("cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()) + ")");
  }
  if (a.dim() == 0) throw InvalidArgument("cosine_similarity: zero-norm input");
  const auto av = a.values();
  const auto bv = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
  // sqrt(x * x) == x exactly, so identical vectors score exactly 1.
  const double sim = dot / std::sqrt(a.squared_norm() * b.squared_norm());
  return std::clamp(sim, -1.0, 1.0);
}

/// Id-addressed set of embeddings sharing one dimensionality. Insertion
/// order is preserved.
class EmbeddingStore {
 public:
  void add(std::string id, EmbeddingVector vector) {
    if (!ids_.empty() && vector.dim() != dim()) {
      throw InvalidArgument("embedding '" + id + "' has dim " + std::to_string(vector.dim()) +
                            ", store dim is " + std::to_string(dim()));
    }
    if (vector.dim() == 0) throw InvalidArgument("embedding '" + id + "' is empty");
    if (!index_.emplace(id, ids_.size()).second) {
      throw InvalidArgument("duplicate embedding id '" + id + "'");
    }
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(vector));
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t dim() const noexcept { return vectors_.empty() ? 0 : vectors_.front().dim(); }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  const EmbeddingVector& at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvalidArgument("no embedding for id '" + id + "'");
    return vectors_[it->second];
  }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  const EmbeddingVector& vector(std::size_t i) const { return vectors_[i]; }
  std::span<const std::string> ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::vector<EmbeddingVector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct PoolEntry {
  std::string train_id;
  double s_text = 0.0;

  friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

/// Candidates for one test input, best first.
struct CandidatePool {
  std::string test_id;
  std::vector<PoolEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  friend bool operator==(const CandidatePool&, const CandidatePool&) = default;
};

/// Similarity descending, then train id ascending.
inline bool ranks_before(const PoolEntry& a, const PoolEntry& b) {
  if (a.s_text != b.s_text) return a.s_text > b.s_text;
  return a.train_id < b.train_id;
}

/// The min(k, |store|) stored ids most cosine-similar to `query`.
inline CandidatePool retrieve_topk(const std::string& query_id, const EmbeddingVector& query,
                                   const EmbeddingStore& store, std::size_t k) {
  if (store.empty()) throw InvalidArgument("retrieve_topk: embedding store is empty");
  if (k == 0) throw InvalidArgument("retrieve_topk: k must be at least 1");
  if (query.dim() != store.dim()) {
    throw InvalidArgument("retrieve_topk: query dim " + std::to_string(query.dim()) +
                          " does not match store dim " + std::to_string(store.dim()));
  }

  std::vector<PoolEntry> all;
  all.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    all.push_back({store.id(i), cosine_similarity(query, store.vector(i))});
  }
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    ranks_before);
  all.resize(n);
  return CandidatePool{query_id, std::move(all)};
}

}  // namespace l2d
