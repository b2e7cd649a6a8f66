#pragma once

// Clustered synthetic corpus with embeddings, for desk-scale runs.
//
// Each cluster has a unit-norm center and a majority class. Every example
// picks a cluster uniformly, sits at center + spread * N(0, I) / sqrt(dim),
// and carries the cluster's majority class except with probability
// `label_noise`, where it takes one of the other classes. For two classes a
// neighbor disagrees with a test example's gold label at a rate of about
// 2 * noise * (1 - noise); the defaults give ~30% among the top 30.

#include <cmath>
#include <cstdio>
#include <iterator>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l2d/corpus.hpp"
#include "l2d/error.hpp"
#include "l2d/providers.hpp"
#include "l2d/retrieval.hpp"
#include "l2d/rng.hpp"

namespace l2d {

struct SyntheticSpec {
  std::size_t n_pool = 500;
  std::size_t n_test = 200;
  std::size_t num_classes = 2;
  std::size_t dim = 16;
  std::size_t n_clusters = 20;
  double label_noise = 0.16;
  double spread = 0.6;
  std::uint64_t seed = 2024;

  void validate() const {
    if (n_pool == 0 || n_test == 0) throw InvalidArgument("synthetic corpus sizes must be positive");
    if (num_classes < 2) throw InvalidArgument("synthetic corpus needs at least 2 classes");
    if (dim == 0 || n_clusters == 0) throw InvalidArgument("dim and n_clusters must be positive");
    if (!(label_noise >= 0.0 && label_noise < 1.0)) {
      throw InvalidArgument("label_noise must lie in [0, 1)");
    }
    if (!(spread >= 0.0)) throw InvalidArgument("spread must be non-negative");
  }
};

struct SyntheticData {
  Corpus pool;
  Corpus test;
  EmbeddingStore pool_embeddings;
  EmbeddingStore test_embeddings;
};

inline LabelMap synthetic_label_map(std::size_t num_classes) {
  if (num_classes == 2) return LabelMap::from_names({"negative", "positive"});
  std::vector<std::string> names;
  for (std::size_t c = 0; c < num_classes; ++c) names.push_back("class" + std::to_string(c));
  return LabelMap::from_names(names);
}

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  static const char* const kVocab[] = {
      "amber", "basin", "cedar", "delta", "ember", "fjord", "grove", "harbor", "iris",  "jade",
      "kelp",  "lumen", "maple", "nectar", "onyx", "prairie", "quartz", "reef", "sierra", "tundra",
      "umber", "vale",  "willow", "xenon", "yarrow", "zephyr", "atlas", "brook", "coral", "dune"};
  constexpr std::size_t kVocabSize = std::size(kVocab);

  Rng rng(spec.seed);
  std::vector<std::vector<double>> centers(spec.n_clusters, std::vector<double>(spec.dim));
  for (auto& c : centers) {
    double norm = 0.0;
    for (auto& x : c) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : c) x /= norm;
  }

  const LabelMap labels = synthetic_label_map(spec.num_classes);
  SyntheticData data;
  data.pool.name = "synthetic-pool";
  data.pool.label_map = labels;
  data.pool.role = CorpusRole::pool;
  data.test.name = "synthetic-test";
  data.test.label_map = labels;
  data.test.role = CorpusRole::test;

  const double scale = spec.spread / std::sqrt(static_cast<double>(spec.dim));
  auto emit = [&](Corpus& corpus, EmbeddingStore& store, const std::string& prefix,
                  std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t cluster = rng.below(spec.n_clusters);
      std::vector<double> v = centers[cluster];
      for (auto& x : v) x += scale * rng.normal();
      const std::size_t majority = cluster % spec.num_classes;
      std::size_t label = majority;
      if (rng.uniform() < spec.label_noise) {
        label = (majority + 1 + rng.below(spec.num_classes - 1)) % spec.num_classes;
      }
      std::string text = "item " + prefix + std::to_string(i) + ":";
      for (int w = 0; w < 6; ++w) {
        text += ' ';
        text += kVocab[(cluster * 7 + rng.below(8)) % kVocabSize];
      }
      char id[32];
      std::snprintf(id, sizeof id, "%s%04zu", prefix.c_str(), i);
      corpus.examples.push_back({id, text, label, Json{{"cluster", cluster}}});
      store.add(id, EmbeddingVector(std::move(v)));
    }
  };
  emit(data.pool, data.pool_embeddings, "p", spec.n_pool);
  emit(data.test, data.test_embeddings, "t", spec.n_test);
  return data;
}

struct SyntheticFiles {
  std::filesystem::path pool;
  std::filesystem::path test;
  std::filesystem::path label_map;
  std::filesystem::path pool_embeddings;
  std::filesystem::path test_embeddings;
};

inline SyntheticFiles synthetic_paths(const std::filesystem::path& dir) {
  return {dir / "pool.jsonl", dir / "test.jsonl", dir / "labels.json",
          dir / "pool_embeddings.jsonl", dir / "test_embeddings.jsonl"};
}

inline SyntheticFiles write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  const auto files = synthetic_paths(dir);
  write_corpus(data.pool, files.pool);
  write_corpus(data.test, files.test);
  write_label_map(data.pool.label_map, files.label_map);
  write_embeddings(data.pool_embeddings, files.pool_embeddings);
  write_embeddings(data.test_embeddings, files.test_embeddings);
  return files;
}

}  // namespace l2d
