#pragma once

// Completion backends: the remote /complete protocol and two mocks used for
// desk-scale evaluation.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "l2d/corpus.hpp"
#include "l2d/remote.hpp"

namespace l2d {

/// Everything a completion backend may look at. Mocks read the structured
/// fields; the remote client only sends the prompt.
struct CompletionRequest {
  const std::string& prompt;
  std::span<const std::size_t> demo_labels;  ///< labels of the rendered demonstrations
  std::size_t gold_label;                    ///< in the same class space as demo_labels
  const LabelMap& label_map;                 ///< verbalizers shown in the prompt
  int max_tokens = 16;
};

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const CompletionRequest& request) const = 0;
};

/// Answers the gold verbalizer: an accuracy upper bound.
class MockEchoClient final : public CompletionClient {
 public:
  std::string complete(const CompletionRequest& r) const override {
    return r.label_map.verbalizer(r.gold_label);
  }
};

/// Answers the most frequent label among the demonstrations, lowest class
/// index on ties. With no demonstrations it answers nothing (abstain).
class MockMajorityClient final : public CompletionClient {
 public:
  std::string complete(const CompletionRequest& r) const override {
    if (r.demo_labels.empty()) return {};
    std::vector<std::size_t> counts(r.label_map.num_classes(), 0);
    for (auto l : r.demo_labels) ++counts.at(l);
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
      if (counts[c] > counts[best]) best = c;
    }
    return r.label_map.verbalizer(best);
  }
};

class RemoteCompletionClient final : public CompletionClient {
 public:
  RemoteCompletionClient(std::string endpoint, RetryPolicy policy)
      : client_(std::move(endpoint), policy) {}

  std::string complete(const CompletionRequest& r) const override {
    return remote_complete(client_, r.prompt, r.max_tokens);
  }

 private:
  HttpJsonClient client_;
};

}  // namespace l2d
