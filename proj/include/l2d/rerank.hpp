#pragma once

// Hybrid reranking of a TopK candidate pool and final n-shot selection.

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "l2d/distribution_store.hpp"
#include "l2d/divergence.hpp"
#include "l2d/error.hpp"
#include "l2d/retrieval.hpp"

namespace l2d {

/// In-prompt order of the selected demonstrations.
enum class OrderPolicy {
  score_descending,           ///< best demonstration first
  score_ascending_best_last,  ///< best demonstration adjacent to the query
};

inline std::string_view to_string(OrderPolicy p) {
  return p == OrderPolicy::score_descending ? "score_descending" : "score_ascending_best_last";
}

inline OrderPolicy parse_order_policy(std::string_view s) {
  if (s == "score_descending") return OrderPolicy::score_descending;
  if (s == "score_ascending_best_last") return OrderPolicy::score_ascending_best_last;
  throw InvalidArgument("unknown order policy '" + std::string(s) + "'");
}

struct SelectionConfig {
  double alpha = 0.5;
  std::size_t k_candidates = 30;
  std::size_t n_shot = 8;
  OrderPolicy order_policy = OrderPolicy::score_ascending_best_last;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw InvalidArgument("alpha must lie in [0, 1], got " + std::to_string(alpha));
    }
    if (k_candidates == 0) throw InvalidArgument("k_candidates must be positive");
    if (n_shot == 0) throw InvalidArgument("n_shot must be positive");
    if (n_shot > k_candidates) {
      throw InvalidArgument("n_shot (" + std::to_string(n_shot) + ") exceeds k_candidates (" +
                            std::to_string(k_candidates) + ")");
    }
  }

  friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

struct Candidate {
  std::string train_id;
  double s_text = 0.0;
  double s_label = 0.0;
  double s_hybrid = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// alpha * s_text + (1 - alpha) * s_label.
inline double hybrid_score(double s_text, double s_label, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("hybrid_score: alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  if (!(s_label >= 0.0 && s_label <= 1.0)) {
    throw InvalidArgument("hybrid_score: s_label must lie in [0, 1]");
  }
  return alpha * s_text + (1.0 - alpha) * s_label;
}

/// Hybrid descending, then s_text descending, then train id ascending.
inline bool hybrid_ranks_before(const Candidate& a, const Candidate& b) {
  if (a.s_hybrid != b.s_hybrid) return a.s_hybrid > b.s_hybrid;
  if (a.s_text != b.s_text) return a.s_text > b.s_text;
  return a.train_id < b.train_id;
}

/// Scores every pooled candidate against the test input's label distribution
/// and returns the full pool in hybrid order.
inline std::vector<Candidate> rerank(const CandidatePool& pool, const LabelDistribution& p_test,
                                     const LabelDistributionStore& pool_dists,
                                     const SelectionConfig& config) {
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    throw InvalidArgument("rerank: alpha must lie in [0, 1]");
  }
  std::vector<Candidate> out;
  out.reserve(pool.size());
  for (const auto& e : pool.entries) {
    const LabelDistribution* dist = pool_dists.find(e.train_id);
    if (dist == nullptr) {
      throw InvalidArgument("rerank: no label distribution for pool id '" + e.train_id + "'");
    }
    if (dist->num_classes() != p_test.num_classes()) {
      throw ClassCountError(p_test.num_classes(), dist->num_classes(),
                            "rerank candidate '" + e.train_id + "'");
    }
    const double s_label = label_match_score(p_test, *dist);
    out.push_back({e.train_id, e.s_text, s_label, hybrid_score(e.s_text, s_label, config.alpha)});
  }
  std::sort(out.begin(), out.end(), hybrid_ranks_before);
  return out;
}

/// The first n_shot ranked ids, in prompt order per the config's policy.
inline std::vector<std::string> select_demonstrations(const std::vector<Candidate>& ranked,
                                                      const SelectionConfig& config) {
  if (ranked.empty()) throw InvalidArgument("select_demonstrations: ranked list is empty");
  if (config.n_shot > ranked.size()) {
    throw InvalidArgument("select_demonstrations: n_shot (" + std::to_string(config.n_shot) +
                          ") exceeds the " + std::to_string(ranked.size()) + " ranked candidates");
  }
  std::vector<std::string> ids;
  ids.reserve(config.n_shot);
  for (std::size_t i = 0; i < config.n_shot; ++i) ids.push_back(ranked[i].train_id);
  if (config.order_policy == OrderPolicy::score_ascending_best_last) {
    std::reverse(ids.begin(), ids.end());
  }
  return ids;
}

}  // namespace l2d
