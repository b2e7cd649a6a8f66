#pragma once

// Sources of embeddings and label distributions: JSON-lines files, the
// one-hot oracle used in perturbation studies and the uniform null model.
// Remote providers live in remote.hpp.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l2d/corpus.hpp"
#include "l2d/distribution_store.hpp"
#include "l2d/divergence.hpp"
#include "l2d/error.hpp"
#include "l2d/jsonl.hpp"
#include "l2d/retrieval.hpp"

namespace l2d {

inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {
inline bool is_canonical(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) {
    // Renormalizing a clamped vector can push the floor a hair below 1e-12.
    if (!(x >= kProbabilityFloor * (1.0 - 1e-6) && x <= 1.0)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= 1e-12;
}
}  // namespace detail

/// Clamp to [1e-12, 1] and renormalize, repeated until stable. Vectors that
/// are already canonical come back bit-for-bit unchanged, which makes the
/// operation idempotent.
inline std::vector<double> sanitize(std::vector<double> v) {
  if (v.size() < 2) throw InvalidArgument("distribution needs at least 2 classes");
  for (double x : v) {
    if (std::isnan(x)) throw InvalidArgument("distribution contains NaN");
  }
  for (int pass = 0; pass < 8 && !detail::is_canonical(v); ++pass) {
    double sum = 0.0;
    for (double& x : v) {
      x = std::clamp(x, kProbabilityFloor, 1.0);
      sum += x;
    }
    for (double& x : v) x /= sum;
  }
  return v;
}

inline LabelDistribution sanitized_distribution(std::vector<double> raw) {
  return LabelDistribution(sanitize(std::move(raw)));
}

// --- label distribution files ------------------------------------------------

struct DistributionLoadStats {
  std::size_t records = 0;
  std::size_t sanitized = 0;  ///< records altered by sanitization
};

/// JSON-lines {"id": string, "probs": [float, ...]}.
inline LabelDistributionStore load_label_distributions(const std::filesystem::path& path,
                                                       std::size_t num_classes,
                                                       DistributionLoadStats* stats = nullptr) {
  LabelDistributionStore store(num_classes);
  DistributionLoadStats local;
  const std::string source = path.string();
  io::for_each_record(path, [&](const Json& rec, std::size_t line) {
    if (!rec.contains("id") || !rec.at("id").is_string()) {
      throw ParseError(source, line, "missing string \"id\"");
    }
    if (!rec.contains("probs") || !rec.at("probs").is_array()) {
      throw ParseError(source, line, "missing array \"probs\"");
    }
    const auto id = rec.at("id").get<std::string>();
    auto raw = rec.at("probs").get<std::vector<double>>();
    if (raw.size() != num_classes) {
      throw ParseError(source, line,
                       "'" + id + "' has " + std::to_string(raw.size()) + " probabilities, expected " +
                           std::to_string(num_classes));
    }
    auto clean = sanitize(raw);
    if (clean != raw) ++local.sanitized;
    if (store.find(id) != nullptr) throw ParseError(source, line, "duplicate id '" + id + "'");
    store.add(id, LabelDistribution(std::move(clean)));
    ++local.records;
  });
  if (stats) *stats = local;
  return store;
}

inline std::string serialize_label_distributions(const LabelDistributionStore& store) {
  std::string out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto probs = store.distribution(i).probs();
    Json rec{{"id", store.id(i)}, {"probs", std::vector<double>(probs.begin(), probs.end())}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline void write_label_distributions(const LabelDistributionStore& store,
                                      const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_label_distributions(store));
}

// --- embedding files -------------------------------------------------------

/// JSON-lines {"id": string, "vector": [float, ...]}.
inline EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  EmbeddingStore store;
  const std::string source = path.string();
  io::for_each_record(path, [&](const Json& rec, std::size_t line) {
    if (!rec.contains("id") || !rec.at("id").is_string()) {
      throw ParseError(source, line, "missing string \"id\"");
    }
    if (!rec.contains("vector") || !rec.at("vector").is_array()) {
      throw ParseError(source, line, "missing array \"vector\"");
    }
    const auto id = rec.at("id").get<std::string>();
    auto values = rec.at("vector").get<std::vector<double>>();
    if (!store.empty() && values.size() != store.dim()) {
      throw ParseError(source, line,
                       "embedding '" + id + "' has dim " + std::to_string(values.size()) +
                           ", expected " + std::to_string(store.dim()));
    }
    if (store.contains(id)) throw ParseError(source, line, "duplicate id '" + id + "'");
    try {
      store.add(id, EmbeddingVector(std::move(values)));
    } catch (const InvalidArgument& e) {
      throw ParseError(source, line, "embedding '" + id + "': " + e.what());
    }
  });
  if (store.empty()) throw ParseError(source, 0, "embedding file holds no records");
  return store;
}

inline std::string serialize_embeddings(const EmbeddingStore& store) {
  std::string out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto v = store.vector(i).values();
    Json rec{{"id", store.id(i)}, {"vector", std::vector<double>(v.begin(), v.end())}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_embeddings(store));
}

// --- synthetic providers -----------------------------------------------------

enum class OracleMode { faithful, reversed, arbitrary };

inline std::string_view to_string(OracleMode m) {
  switch (m) {
    case OracleMode::faithful: return "faithful";
    case OracleMode::reversed: return "reversed";
    case OracleMode::arbitrary: return "arbitrary";
  }
  return "faithful";
}

inline OracleMode parse_oracle_mode(std::string_view s) {
  if (s == "faithful") return OracleMode::faithful;
  if (s == "reversed") return OracleMode::reversed;
  if (s == "arbitrary") return OracleMode::arbitrary;
  throw InvalidArgument("unknown oracle mode '" + std::string(s) + "'");
}

struct OracleDistributions {
  LabelDistributionStore distributions;
  LabelMap label_map;  ///< symbol verbalizers under OracleMode::arbitrary
};

/// Sanitized one-hot distribution at each example's gold label (flipped label
/// under `reversed`). `arbitrary` keeps the geometry and swaps verbalizers.
inline OracleDistributions one_hot_oracle(const Corpus& corpus, OracleMode mode) {
  const std::size_t n = corpus.label_map.num_classes();
  if (mode == OracleMode::reversed && n != 2) {
    throw InvalidArgument("reversed one-hot oracle needs 2 classes, '" + corpus.name + "' has " +
                          std::to_string(n));
  }
  OracleDistributions out{LabelDistributionStore(n), corpus.label_map};
  if (mode == OracleMode::arbitrary) out.label_map = arbitrary_label_map(corpus.label_map);
  for (const auto& ex : corpus.examples) {
    const std::size_t label = mode == OracleMode::reversed ? 1 - ex.label : ex.label;
    std::vector<double> p(n, 0.0);
    p.at(label) = 1.0;
    out.distributions.add(ex.id, sanitized_distribution(std::move(p)));
  }
  return out;
}

/// Every class equiprobable for every example.
inline LabelDistributionStore uniform_distributions(const Corpus& corpus) {
  const std::size_t n = corpus.label_map.num_classes();
  LabelDistributionStore store(n);
  for (const auto& ex : corpus.examples) store.add(ex.id, LabelDistribution::uniform(n));
  return store;
}

// --- configuration -----------------------------------------------------------

enum class ProviderKind { file, remote, one_hot_oracle, uniform };

inline std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::file: return "file";
    case ProviderKind::remote: return "remote";
    case ProviderKind::one_hot_oracle: return "one_hot_oracle";
    case ProviderKind::uniform: return "uniform";
  }
  return "file";
}

inline ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "file") return ProviderKind::file;
  if (s == "remote") return ProviderKind::remote;
  if (s == "one_hot_oracle") return ProviderKind::one_hot_oracle;
  if (s == "uniform") return ProviderKind::uniform;
  throw InvalidArgument("unknown provider kind '" + std::string(s) + "'");
}

struct ProviderConfig {
  ProviderKind kind = ProviderKind::file;
  std::optional<std::string> path;
  std::optional<std::string> endpoint;
  int timeout_ms = 10000;
  int max_retries = 3;
  int backoff_initial_ms = 250;
  std::size_t max_in_flight = 8;
  std::size_t batch_size = 32;
  OracleMode oracle_mode = OracleMode::faithful;

  void validate(std::string_view role) const {
    const std::string r(role);
    if (kind == ProviderKind::file && !path) throw ConfigError(r + ": file provider needs a path");
    if (kind == ProviderKind::remote && !endpoint) {
      throw ConfigError(r + ": remote provider needs an endpoint");
    }
    if (timeout_ms <= 0) throw ConfigError(r + ": timeout_ms must be positive");
    if (max_retries < 0 || max_retries > 10) throw ConfigError(r + ": max_retries out of range");
    if (max_in_flight == 0 || batch_size == 0) {
      throw ConfigError(r + ": max_in_flight and batch_size must be positive");
    }
  }
};

}  // namespace l2d
