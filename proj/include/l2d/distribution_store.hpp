#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "l2d/divergence.hpp"
#include "l2d/error.hpp"

namespace l2d {

/// Id-addressed label distributions sharing one class count. Insertion order
/// is preserved so stores serialize deterministically.
class LabelDistributionStore {
 public:
  LabelDistributionStore() = default;
  explicit LabelDistributionStore(std::size_t num_classes) : num_classes_(num_classes) {}

  void add(std::string id, LabelDistribution dist) {
    if (num_classes_ == 0) num_classes_ = dist.num_classes();
    if (dist.num_classes() != num_classes_) {
      throw ClassCountError(num_classes_, dist.num_classes(), "distribution '" + id + "'");
    }
    if (!index_.emplace(id, ids_.size()).second) {
      throw InvalidArgument("duplicate distribution id '" + id + "'");
    }
    ids_.push_back(std::move(id));
    dists_.push_back(std::move(dist));
  }

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  /// nullptr when the id is absent.
  const LabelDistribution* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &dists_[it->second];
  }

  const LabelDistribution& at(const std::string& id) const {
    if (const auto* d = find(id)) return *d;
    throw InvalidArgument("no label distribution for id '" + id + "'");
  }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  const LabelDistribution& distribution(std::size_t i) const { return dists_[i]; }

 private:
  std::size_t num_classes_ = 0;
  std::vector<std::string> ids_;
  std::vector<LabelDistribution> dists_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace l2d
