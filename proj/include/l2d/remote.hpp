#pragma once

// HTTP clients for the remote classify / embed / complete protocols.
//
//   POST <endpoint>/classify {"texts": [...]}              -> {"distributions": [[...], ...]}
//   POST <endpoint>/embed    {"texts": [...]}              -> {"vectors": [[...], ...]}
//   POST <endpoint>/complete {"prompt": s, "max_tokens": n} -> {"text": s}

#include <algorithm>
#include <chrono>
#include <iterator>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "l2d/divergence.hpp"
#include "l2d/error.hpp"
#include "l2d/jsonl.hpp"
#include "l2d/parallel.hpp"
#include "l2d/providers.hpp"
#include "l2d/retrieval.hpp"

namespace l2d {

struct RetryPolicy {
  int timeout_ms = 10000;
  int max_retries = 3;
  int backoff_initial_ms = 250;

  static RetryPolicy from(const ProviderConfig& c) {
    return {c.timeout_ms, c.max_retries, c.backoff_initial_ms};
  }
};

/// POSTs JSON bodies to one endpoint, retrying transient failures
/// (connection errors, timeouts, 408, 429, 5xx) with exponential backoff.
class HttpJsonClient {
 public:
  HttpJsonClient(std::string endpoint, RetryPolicy policy) : policy_(policy) {
    while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
    const auto scheme = endpoint.find("://");
    const auto path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
      origin_ = endpoint;
    } else {
      origin_ = endpoint.substr(0, path_start);
      base_path_ = endpoint.substr(path_start);
    }
    if (origin_.empty()) throw ConfigError("empty endpoint URL");
  }

  Json post(const std::string& route, const Json& body) const {
    const std::string payload = body.dump();
    const std::string target = base_path_ + route;
    int delay_ms = policy_.backoff_initial_ms;
    int last_status = 0;
    std::string last_body;
    std::string last_error;

    for (int attempt = 0; attempt <= policy_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        delay_ms *= 2;
      }
      httplib::Client client(origin_);
      const auto timeout = std::chrono::milliseconds(policy_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);

      auto res = client.Post(target, payload, "application/json");
      if (!res) {
        last_status = 0;
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 200 && res->status < 300) {
        try {
          return Json::parse(res->body);
        } catch (const Json::exception& e) {
          throw ProtocolError("POST " + target + ": response is not JSON: " + e.what());
        }
      }
      last_status = res->status;
      last_body = res->body.substr(0, 200);
      last_error = "HTTP " + std::to_string(res->status);
      const bool transient = res->status == 408 || res->status == 429 || res->status >= 500;
      if (!transient) break;
    }
    throw RequestError(last_status, last_body,
                       "POST " + origin_ + target + " failed: " + last_error +
                           (last_body.empty() ? std::string{} : " (" + last_body + ")"));
  }

 private:
  std::string origin_;
  std::string base_path_;
  RetryPolicy policy_;
};

namespace detail {

/// Splits `texts` into batches, posts each, and concatenates the per-batch
/// results in input order. At most `max_in_flight` requests run at once.
template <typename T, typename Decode>
std::vector<T> batched_post(const ProviderConfig& config, const std::string& route,
                            const std::vector<std::string>& texts, Decode decode) {
  if (!config.endpoint) throw ConfigError("remote provider needs an endpoint");
  if (texts.empty()) return {};
  HttpJsonClient client(*config.endpoint, RetryPolicy::from(config));
  const std::size_t batch = std::max<std::size_t>(config.batch_size, 1);
  const std::size_t n_batches = (texts.size() + batch - 1) / batch;
  std::vector<std::vector<T>> parts(n_batches);

  parallel_for(n_batches, config.max_in_flight, [&](std::size_t b) {
    const auto begin = texts.begin() + static_cast<std::ptrdiff_t>(b * batch);
    const auto end = texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), (b + 1) * batch));
    std::vector<std::string> chunk(begin, end);
    const Json response = client.post(route, Json{{"texts", chunk}});
    parts[b] = decode(response, chunk.size());
  });

  std::vector<T> out;
  out.reserve(texts.size());
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  return out;
}

}  // namespace detail

/// One sanitized distribution per text, in input order.
inline std::vector<LabelDistribution> remote_classify(const ProviderConfig& config,
                                                      const std::vector<std::string>& texts,
                                                      std::size_t num_classes) {
  return detail::batched_post<LabelDistribution>(
      config, "/classify", texts, [num_classes](const Json& r, std::size_t expected) {
        if (!r.is_object() || !r.contains("distributions") || !r.at("distributions").is_array()) {
          throw ProtocolError("classify response lacks a \"distributions\" array");
        }
        const Json& ds = r.at("distributions");
        if (ds.size() != expected) {
          throw ProtocolError("classify returned " + std::to_string(ds.size()) +
                              " distributions for " + std::to_string(expected) + " texts");
        }
        std::vector<LabelDistribution> out;
        out.reserve(expected);
        for (const auto& d : ds) {
          if (!d.is_array() || d.size() != num_classes) {
            throw ProtocolError("classify returned a distribution with " +
                                std::to_string(d.is_array() ? d.size() : 0) + " entries, expected " +
                                std::to_string(num_classes));
          }
          try {
            out.push_back(sanitized_distribution(d.get<std::vector<double>>()));
          } catch (const Json::exception& e) {
            throw ProtocolError(std::string("classify returned a non-numeric entry: ") + e.what());
          } catch (const InvalidArgument& e) {
            throw ProtocolError(std::string("classify returned an invalid distribution: ") + e.what());
          }
        }
        return out;
      });
}

/// One embedding per text, in input order.
inline std::vector<EmbeddingVector> remote_embed(const ProviderConfig& config,
                                                 const std::vector<std::string>& texts) {
  return detail::batched_post<EmbeddingVector>(
      config, "/embed", texts, [](const Json& r, std::size_t expected) {
        if (!r.is_object() || !r.contains("vectors") || !r.at("vectors").is_array()) {
          throw ProtocolError("embed response lacks a \"vectors\" array");
        }
        const Json& vs = r.at("vectors");
        if (vs.size() != expected) {
          throw ProtocolError("embed returned " + std::to_string(vs.size()) + " vectors for " +
                              std::to_string(expected) + " texts");
        }
        std::vector<EmbeddingVector> out;
        out.reserve(expected);
        for (const auto& v : vs) {
          try {
            out.emplace_back(v.get<std::vector<double>>());
          } catch (const Json::exception& e) {
            throw ProtocolError(std::string("embed returned a malformed vector: ") + e.what());
          } catch (const InvalidArgument& e) {
            throw ProtocolError(std::string("embed returned an invalid vector: ") + e.what());
          }
        }
        return out;
      });
}

/// Text completion for one prompt.
inline std::string remote_complete(const HttpJsonClient& client, const std::string& prompt,
                                   int max_tokens) {
  const Json r = client.post("/complete", Json{{"prompt", prompt}, {"max_tokens", max_tokens}});
  if (!r.is_object() || !r.contains("text") || !r.at("text").is_string()) {
    throw ProtocolError("complete response lacks a string \"text\"");
  }
  return r.at("text").get<std::string>();
}

}  // namespace l2d
