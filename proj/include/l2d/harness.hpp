#pragma once

// End-to-end evaluation: select -> render -> complete -> parse -> score, plus
// ablations, sweeps and run persistence.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "l2d/completion.hpp"
#include "l2d/corpus.hpp"
#include "l2d/distribution_store.hpp"
#include "l2d/error.hpp"
#include "l2d/jsonl.hpp"
#include "l2d/parallel.hpp"
#include "l2d/prompt.hpp"
#include "l2d/providers.hpp"
#include "l2d/remote.hpp"
#include "l2d/rerank.hpp"
#include "l2d/retrieval.hpp"
#include "l2d/rng.hpp"

namespace l2d {

enum class Method { random, topk, topk_l2d, wo_sem, wo_l2d };
enum class CompletionKind { remote, mock_majority, mock_echo };
enum class Perturbation { none, reversed, arbitrary };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::random: return "random";
    case Method::topk: return "topk";
    case Method::topk_l2d: return "topk_l2d";
    case Method::wo_sem: return "wo_sem";
    case Method::wo_l2d: return "wo_l2d";
  }
  return "topk_l2d";
}

inline Method parse_method(std::string_view s) {
  for (auto m : {Method::random, Method::topk, Method::topk_l2d, Method::wo_sem, Method::wo_l2d}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

inline std::string_view to_string(CompletionKind k) {
  switch (k) {
    case CompletionKind::remote: return "remote";
    case CompletionKind::mock_majority: return "mock_majority";
    case CompletionKind::mock_echo: return "mock_echo";
  }
  return "mock_majority";
}

inline CompletionKind parse_completion_kind(std::string_view s) {
  if (s == "remote") return CompletionKind::remote;
  if (s == "mock_majority") return CompletionKind::mock_majority;
  if (s == "mock_echo") return CompletionKind::mock_echo;
  throw ConfigError("unknown completion '" + std::string(s) + "'");
}

inline std::string_view to_string(Perturbation p) {
  switch (p) {
    case Perturbation::none: return "none";
    case Perturbation::reversed: return "reversed";
    case Perturbation::arbitrary: return "arbitrary";
  }
  return "none";
}

inline Perturbation parse_perturbation(std::string_view s) {
  if (s == "none") return Perturbation::none;
  if (s == "reversed") return Perturbation::reversed;
  if (s == "arbitrary") return Perturbation::arbitrary;
  throw ConfigError("unknown perturbation '" + std::string(s) + "'");
}

/// Everything that defines one evaluation run.
struct RunConfig {
  SelectionConfig selection;
  Method method = Method::topk_l2d;

  std::string pool_corpus;
  std::string test_corpus;
  std::string label_map;
  std::string test_label_map;  ///< empty: same as label_map
  std::vector<std::pair<std::string, std::string>> ood_alignment;

  ProviderConfig pool_embeddings;
  ProviderConfig test_embeddings;
  std::optional<ProviderConfig> pool_distributions;
  std::optional<ProviderConfig> test_distributions;

  std::string template_ref = "sentiment";  ///< family name or template file
  CompletionKind completion = CompletionKind::mock_majority;
  std::optional<ProviderConfig> completion_remote;
  int max_tokens = 16;

  /// Applied to the pool's rendered labels only; label distributions are
  /// computed from the unperturbed corpus.
  Perturbation perturbation = Perturbation::none;
  bool shuffle_symbols = false;

  std::uint64_t seed = 42;
  std::size_t parallelism = 8;
  std::string report_dir;  ///< empty: nothing persisted
};

/// Alpha the ranking actually uses: the ablations pin it.
inline double effective_alpha(const RunConfig& c, bool has_distributions) {
  switch (c.method) {
    case Method::wo_sem: return 0.0;
    case Method::wo_l2d:
    case Method::topk: return 1.0;
    case Method::topk_l2d: return c.selection.alpha;
    case Method::random: return has_distributions ? c.selection.alpha : 1.0;
  }
  return c.selection.alpha;
}

inline bool method_needs_distributions(Method m) {
  return m == Method::topk_l2d || m == Method::wo_sem || m == Method::wo_l2d;
}

inline Json provider_to_json(const ProviderConfig& p) {
  Json j{{"kind", to_string(p.kind)}};
  if (p.path) j["path"] = *p.path;
  if (p.endpoint) j["endpoint"] = *p.endpoint;
  if (p.kind == ProviderKind::remote) {
    j["timeout_ms"] = p.timeout_ms;
    j["max_retries"] = p.max_retries;
    j["max_in_flight"] = p.max_in_flight;
    j["batch_size"] = p.batch_size;
  }
  if (p.kind == ProviderKind::one_hot_oracle) j["oracle_mode"] = to_string(p.oracle_mode);
  return j;
}

inline Json config_to_json(const RunConfig& c) {
  Json sel{{"alpha", c.selection.alpha},
           {"k_candidates", c.selection.k_candidates},
           {"n_shot", c.selection.n_shot},
           {"order_policy", to_string(c.selection.order_policy)}};
  Json providers{{"pool_embeddings", provider_to_json(c.pool_embeddings)},
                 {"test_embeddings", provider_to_json(c.test_embeddings)}};
  if (c.pool_distributions) providers["pool_distributions"] = provider_to_json(*c.pool_distributions);
  if (c.test_distributions) providers["test_distributions"] = provider_to_json(*c.test_distributions);
  Json j{{"selection", std::move(sel)},
         {"method", to_string(c.method)},
         {"pool_corpus", c.pool_corpus},
         {"test_corpus", c.test_corpus},
         {"label_map", c.label_map}};
  if (!c.test_label_map.empty()) j["test_label_map"] = c.test_label_map;
  if (!c.ood_alignment.empty()) {
    Json a = Json::array();
    for (const auto& [p, t] : c.ood_alignment) a.push_back({p, t});
    j["ood_alignment"] = std::move(a);
  }
  j["providers"] = std::move(providers);
  j["template"] = c.template_ref;
  j["completion"] = to_string(c.completion);
  if (c.completion_remote) j["completion_remote"] = provider_to_json(*c.completion_remote);
  j["max_tokens"] = c.max_tokens;
  j["perturbation"] = to_string(c.perturbation);
  if (c.shuffle_symbols) j["shuffle_symbols"] = true;
  j["seed"] = c.seed;
  j["parallelism"] = c.parallelism;
  return j;
}

/// FNV-1a over the canonical config echo; names report files. Parallelism
/// does not change results and is left out.
inline std::string run_id(const RunConfig& c) {
  Json echo = config_to_json(c);
  echo.erase("parallelism");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : echo.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- run report ----------------------------------------------------------------

struct ExampleTrace {
  std::string test_id;
  std::vector<Candidate> selected;  ///< prompt order
  int predicted = kAbstain;         ///< test class index or kAbstain
  std::size_t gold = 0;

  friend bool operator==(const ExampleTrace&, const ExampleTrace&) = default;
};

struct RunReport {
  double accuracy = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_total = 0;
  std::size_t n_abstain = 0;
  std::vector<ExampleTrace> per_example;
  Json config_echo;
  double effective_alpha = 1.0;
  std::int64_t wall_time_ms = 0;

  std::vector<std::vector<std::string>> selected_ids() const {
    std::vector<std::vector<std::string>> out;
    out.reserve(per_example.size());
    for (const auto& t : per_example) {
      auto& ids = out.emplace_back();
      for (const auto& c : t.selected) ids.push_back(c.train_id);
    }
    return out;
  }
};

inline Json report_to_json(const RunReport& r) {
  Json examples = Json::array();
  for (const auto& t : r.per_example) {
    Json sel = Json::array();
    for (const auto& c : t.selected) {
      sel.push_back({{"train_id", c.train_id},
                     {"s_text", c.s_text},
                     {"s_label", c.s_label},
                     {"s_hybrid", c.s_hybrid}});
    }
    examples.push_back({{"test_id", t.test_id},
                        {"selected", std::move(sel)},
                        {"predicted", t.predicted},
                        {"gold", t.gold}});
  }
  return Json{{"accuracy", r.accuracy},
              {"n_correct", r.n_correct},
              {"n_total", r.n_total},
              {"n_abstain", r.n_abstain},
              {"effective_alpha", r.effective_alpha},
              {"per_example", std::move(examples)},
              {"config_echo", r.config_echo},
              {"wall_time_ms", r.wall_time_ms}};
}

inline RunReport report_from_json(const Json& j) {
  RunReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.n_correct = j.at("n_correct").get<std::size_t>();
  r.n_total = j.at("n_total").get<std::size_t>();
  r.n_abstain = j.at("n_abstain").get<std::size_t>();
  r.effective_alpha = j.at("effective_alpha").get<double>();
  for (const auto& e : j.at("per_example")) {
    ExampleTrace t;
    t.test_id = e.at("test_id").get<std::string>();
    t.predicted = e.at("predicted").get<int>();
    t.gold = e.at("gold").get<std::size_t>();
    for (const auto& c : e.at("selected")) {
      t.selected.push_back({c.at("train_id").get<std::string>(), c.at("s_text").get<double>(),
                            c.at("s_label").get<double>(), c.at("s_hybrid").get<double>()});
    }
    r.per_example.push_back(std::move(t));
  }
  r.config_echo = j.at("config_echo");
  r.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
  return r;
}

inline std::string serialize_report(const RunReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline RunReport load_report(const std::filesystem::path& path) {
  try {
    return report_from_json(Json::parse(io::read_file(path)));
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

/// One JSON file per run plus an append-only `index.jsonl`.
class ReportStore {
 public:
  explicit ReportStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path report_path(const std::string& id) const { return dir_ / (id + ".json"); }
  std::filesystem::path index_path() const { return dir_ / "index.jsonl"; }

  void save(const std::string& id, const RunReport& report) const {
    io::write_file_atomic(report_path(id), serialize_report(report));
    std::filesystem::create_directories(dir_);
    std::ofstream index(index_path(), std::ios::app | std::ios::binary);
    Json line{{"run_id", id},
              {"file", id + ".json"},
              {"method", report.config_echo.value("method", std::string{})},
              {"accuracy", report.accuracy},
              {"n_total", report.n_total}};
    index << line.dump() << '\n';
  }

  void save_partial(const std::string& id, const RunReport& partial, const std::string& error) const {
    Json j = report_to_json(partial);
    j["status"] = "aborted";
    j["error"] = error;
    io::write_file_atomic(dir_ / (id + ".partial.json"), j.dump(2) + "\n");
  }

  /// A finished report for `id` listed in the index, if any.
  std::optional<RunReport> find(const std::string& id) const {
    if (!std::filesystem::exists(index_path())) return std::nullopt;
    bool listed = false;
    io::for_each_record(index_path(), [&](const Json& rec, std::size_t) {
      if (rec.value("run_id", std::string{}) == id) listed = true;
    });
    if (!listed || !std::filesystem::exists(report_path(id))) return std::nullopt;
    return load_report(report_path(id));
  }

 private:
  std::filesystem::path dir_;
};

// --- inputs --------------------------------------------------------------------

/// Loaded, validated data for a run.
struct PipelineInputs {
  Corpus pool;
  Corpus test;
  EmbeddingStore pool_embeddings;
  EmbeddingStore test_embeddings;
  std::optional<LabelDistributionStore> pool_distributions;
  /// In the pool's class order (already permuted when the pairing is OOD).
  std::optional<LabelDistributionStore> test_distributions;
  PromptTemplate prompt_template;
  std::optional<OodPairing> pairing;  ///< set when pool and test label maps differ
  bool exclude_self = false;          ///< pool and test come from the same corpus
  std::optional<LabelMap> oracle_label_map;  ///< symbol verbalizers from an arbitrary oracle
};

namespace detail {

inline EmbeddingStore embeddings_for(const ProviderConfig& p, const Corpus& corpus,
                                     std::string_view role) {
  p.validate(role);
  if (p.kind == ProviderKind::file) return load_embeddings(*p.path);
  if (p.kind == ProviderKind::remote) {
    std::vector<std::string> texts;
    for (const auto& ex : corpus.examples) texts.push_back(ex.text);
    auto vectors = remote_embed(p, texts);
    EmbeddingStore store;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      store.add(corpus.examples[i].id, std::move(vectors[i]));
    }
    return store;
  }
  throw ConfigError(std::string(role) + ": embeddings come from a file or a remote provider");
}

inline LabelDistributionStore distributions_for(const ProviderConfig& p, const Corpus& corpus,
                                                std::string_view role,
                                                std::optional<LabelMap>* oracle_map) {
  p.validate(role);
  const std::size_t n = corpus.label_map.num_classes();
  switch (p.kind) {
    case ProviderKind::file: return load_label_distributions(*p.path, n);
    case ProviderKind::remote: {
      std::vector<std::string> texts;
      for (const auto& ex : corpus.examples) texts.push_back(ex.text);
      auto dists = remote_classify(p, texts, n);
      LabelDistributionStore store(n);
      for (std::size_t i = 0; i < dists.size(); ++i) store.add(corpus.examples[i].id, dists[i]);
      return store;
    }
    case ProviderKind::one_hot_oracle: {
      auto out = one_hot_oracle(corpus, p.oracle_mode);
      if (p.oracle_mode == OracleMode::arbitrary && oracle_map) *oracle_map = out.label_map;
      return std::move(out.distributions);
    }
    case ProviderKind::uniform: return uniform_distributions(corpus);
  }
  throw ConfigError("unknown provider kind");
}

/// Reorders test-space distributions into pool class order.
inline LabelDistributionStore to_pool_space(const LabelDistributionStore& test_space,
                                            const OodPairing& pairing) {
  LabelDistributionStore out(test_space.num_classes());
  for (std::size_t i = 0; i < test_space.size(); ++i) {
    const auto& d = test_space.distribution(i);
    std::vector<double> p(d.num_classes());
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = d[pairing.pool_to_test.at(c)];
    out.add(test_space.id(i), LabelDistribution(std::move(p)));
  }
  return out;
}

inline bool same_file(const std::string& a, const std::string& b) {
  std::error_code ec;
  if (std::filesystem::equivalent(a, b, ec)) return true;
  return !ec ? false : a == b;
}

}  // namespace detail

/// Rejects inputs that would fail mid-run: missing embeddings or
/// distributions, and class counts that disagree.
inline void validate_inputs(const RunConfig& config, const PipelineInputs& in) {
  try {
    config.selection.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const std::size_t n = in.pool.label_map.num_classes();
  if (in.test.label_map.num_classes() != n) {
    throw ConfigError("pool has " + std::to_string(n) + " classes, test has " +
                      std::to_string(in.test.label_map.num_classes()));
  }
  if (in.prompt_template.num_classes() != 0 && in.prompt_template.num_classes() != n) {
    throw ConfigError("template '" + in.prompt_template.task_name() + "' expects " +
                      std::to_string(in.prompt_template.num_classes()) + " classes, corpus has " +
                      std::to_string(n));
  }
  if (in.pool.examples.empty()) throw ConfigError("pool corpus is empty");
  for (const auto& ex : in.pool.examples) {
    if (!in.pool_embeddings.contains(ex.id)) throw ConfigError("no embedding for pool id '" + ex.id + "'");
  }
  for (const auto& ex : in.test.examples) {
    if (!in.test_embeddings.contains(ex.id)) throw ConfigError("no embedding for test id '" + ex.id + "'");
  }
  if (in.pool_embeddings.dim() != in.test_embeddings.dim()) {
    throw ConfigError("pool and test embeddings differ in dimension");
  }
  if (method_needs_distributions(config.method) &&
      (!in.pool_distributions || !in.test_distributions)) {
    throw ConfigError(std::string("method ") + std::string(to_string(config.method)) +
                      " needs pool and test label distributions");
  }
  if (in.pool_distributions.has_value() != in.test_distributions.has_value()) {
    throw ConfigError("label distributions must be given for both pool and test");
  }
  if (in.pool_distributions) {
    for (const auto* store : {&*in.pool_distributions, &*in.test_distributions}) {
      if (store->num_classes() != n && !store->empty()) {
        throw ConfigError("label distributions have " + std::to_string(store->num_classes()) +
                          " classes, label map has " + std::to_string(n));
      }
    }
    for (const auto& ex : in.pool.examples) {
      if (!in.pool_distributions->find(ex.id)) {
        throw ConfigError("no label distribution for pool id '" + ex.id + "'");
      }
    }
    for (const auto& ex : in.test.examples) {
      if (!in.test_distributions->find(ex.id)) {
        throw ConfigError("no label distribution for test id '" + ex.id + "'");
      }
    }
  }
  const std::size_t available = in.pool.size() - (in.exclude_self ? 1 : 0);
  if (config.selection.n_shot > available) {
    throw ConfigError("n_shot exceeds the " + std::to_string(available) + " available demonstrations");
  }
}

/// Resolves every file, provider and template reference in the config.
inline PipelineInputs load_inputs(const RunConfig& config) {
  if (config.pool_corpus.empty() || config.test_corpus.empty() || config.label_map.empty()) {
    throw ConfigError("pool corpus, test corpus and label map are required");
  }
  PipelineInputs in;
  const LabelMap pool_map = load_label_map(config.label_map);
  const LabelMap test_map =
      config.test_label_map.empty() ? pool_map : load_label_map(config.test_label_map);
  in.pool = load_corpus(config.pool_corpus, pool_map, CorpusRole::pool);
  in.test = load_corpus(config.test_corpus, test_map, CorpusRole::test);
  in.exclude_self = detail::same_file(config.pool_corpus, config.test_corpus);
  if (!(pool_map == test_map)) {
    try {
      in.pairing = make_ood_pair(in.pool, in.test, config.ood_alignment);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }

  in.pool_embeddings = detail::embeddings_for(config.pool_embeddings, in.pool, "pool embeddings");
  in.test_embeddings = in.exclude_self && config.test_embeddings.path == config.pool_embeddings.path &&
                               config.test_embeddings.kind == config.pool_embeddings.kind
                           ? in.pool_embeddings
                           : detail::embeddings_for(config.test_embeddings, in.test, "test embeddings");
  if (config.pool_distributions && config.test_distributions) {
    in.pool_distributions = detail::distributions_for(*config.pool_distributions, in.pool,
                                                      "pool distributions", &in.oracle_label_map);
    auto test_d = detail::distributions_for(*config.test_distributions, in.test,
                                            "test distributions", nullptr);
    in.test_distributions =
        in.pairing ? detail::to_pool_space(test_d, *in.pairing) : std::move(test_d);
  } else if (config.pool_distributions || config.test_distributions) {
    throw ConfigError("label distributions must be given for both pool and test");
  }

  const auto& ref = config.template_ref;
  in.prompt_template = (ref.find('/') == std::string::npos && ref.find(".json") == std::string::npos)
                           ? default_template(ref)
                           : load_template(ref);
  return in;
}

inline std::unique_ptr<CompletionClient> make_completion_client(const RunConfig& config) {
  switch (config.completion) {
    case CompletionKind::mock_echo: return std::make_unique<MockEchoClient>();
    case CompletionKind::mock_majority: return std::make_unique<MockMajorityClient>();
    case CompletionKind::remote:
      if (!config.completion_remote || !config.completion_remote->endpoint) {
        throw ConfigError("remote completion needs an endpoint");
      }
      return std::make_unique<RemoteCompletionClient>(*config.completion_remote->endpoint,
                                                      RetryPolicy::from(*config.completion_remote));
  }
  throw ConfigError("unknown completion kind");
}

// --- selection -------------------------------------------------------------------

/// Fully ranked candidates for one test example under the run's method.
/// Random returns its draws in draw order.
inline std::vector<Candidate> rank_candidates(const RunConfig& config, const PipelineInputs& in,
                                              const Example& query, std::size_t item_index) {
  const bool has_dists = in.pool_distributions.has_value();
  const double alpha = effective_alpha(config, has_dists);
  const EmbeddingVector& q = in.test_embeddings.at(query.id);
  const LabelDistribution* p_test = has_dists ? &in.test_distributions->at(query.id) : nullptr;

  auto score = [&](const std::string& id, double s_text) {
    Candidate c{id, s_text, 0.0, s_text};
    if (p_test) {
      c.s_label = label_match_score(*p_test, in.pool_distributions->at(id));
      c.s_hybrid = hybrid_score(s_text, c.s_label, alpha);
    }
    return c;
  };

  if (config.method == Method::random) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < in.pool.size(); ++i) {
      if (!(in.exclude_self && in.pool.examples[i].id == query.id)) eligible.push_back(i);
    }
    auto rng = Rng::for_item(config.seed, item_index);
    std::vector<Candidate> out;
    for (auto pick : rng.sample_indices(eligible.size(), config.selection.n_shot)) {
      const auto& id = in.pool.examples[eligible[pick]].id;
      out.push_back(score(id, cosine_similarity(q, in.pool_embeddings.at(id))));
    }
    return out;
  }

  const std::size_t k = config.selection.k_candidates;
  const bool drop_self = in.exclude_self && in.pool_embeddings.contains(query.id);
  CandidatePool pool = retrieve_topk(query.id, q, in.pool_embeddings, drop_self ? k + 1 : k);
  if (drop_self) {
    std::erase_if(pool.entries, [&](const PoolEntry& e) { return e.train_id == query.id; });
    if (pool.entries.size() > k) pool.entries.resize(k);
  }

  if (has_dists) {
    SelectionConfig sel = config.selection;
    sel.alpha = alpha;
    return rerank(pool, *p_test, *in.pool_distributions, sel);
  }
  std::vector<Candidate> out;
  for (const auto& e : pool.entries) out.push_back(score(e.train_id, e.s_text));
  return out;
}

/// The n_shot demonstrations for one example, in prompt order.
inline std::vector<Candidate> select_for(const RunConfig& config, const PipelineInputs& in,
                                         const Example& query, std::size_t item_index) {
  auto ranked = rank_candidates(config, in, query, item_index);
  if (config.method == Method::random) return ranked;
  const auto ids = select_demonstrations(ranked, config.selection);
  std::unordered_map<std::string, const Candidate*> by_id;
  for (const auto& c : ranked) by_id.emplace(c.train_id, &c);
  std::vector<Candidate> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(*by_id.at(id));
  return out;
}

// --- pipeline ----------------------------------------------------------------------

inline RunReport run_pipeline(const RunConfig& config, const PipelineInputs& in,
                              const CompletionClient& client) {
  const auto started = std::chrono::steady_clock::now();
  validate_inputs(config, in);

  Corpus shown = in.pool;
  if (config.perturbation == Perturbation::reversed) {
    try {
      shown = perturb_labels(in.pool, PerturbMode::reversed, config.seed);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  } else if (config.perturbation == Perturbation::arbitrary) {
    shown = perturb_labels(in.pool, PerturbMode::arbitrary, config.seed, config.shuffle_symbols);
  } else if (in.oracle_label_map) {
    shown.label_map = *in.oracle_label_map;
  }
  std::unordered_map<std::string, const Example*> pool_by_id;
  for (const auto& ex : shown.examples) pool_by_id.emplace(ex.id, &ex);

  const std::size_t n = in.test.size();
  std::vector<std::optional<ExampleTrace>> traces(n);

  auto process = [&](std::size_t i) {
    const Example& query = in.test.examples[i];
    ExampleTrace trace;
    trace.test_id = query.id;
    trace.gold = query.label;
    trace.selected = select_for(config, in, query, i);

    std::vector<Demonstration> demos;
    std::vector<std::size_t> demo_labels;
    for (const auto& c : trace.selected) {
      const Example& d = *pool_by_id.at(c.train_id);
      demos.push_back({d.text, shown.label_map.verbalizer(d.label)});
      demo_labels.push_back(d.label);
    }
    const std::string prompt = render_prompt(in.prompt_template, demos, query);
    const std::size_t gold_pool = in.pairing ? in.pairing->test_to_pool.at(query.label) : query.label;
    const std::string answer = client.complete(
        CompletionRequest{prompt, demo_labels, gold_pool, shown.label_map, config.max_tokens});
    const int parsed = parse_prediction(answer, shown.label_map);
    trace.predicted = (parsed == kAbstain || !in.pairing)
                          ? parsed
                          : static_cast<int>(in.pairing->pool_to_test.at(static_cast<std::size_t>(parsed)));
    traces[i] = std::move(trace);
  };

  RunReport report;
  report.config_echo = config_to_json(config);
  report.effective_alpha = effective_alpha(config, in.pool_distributions.has_value());

  auto finish = [&](RunReport& r) {
    for (auto& t : traces) {
      if (!t) continue;
      ++r.n_total;
      if (t->predicted == kAbstain) ++r.n_abstain;
      if (t->predicted == static_cast<int>(t->gold)) ++r.n_correct;
      r.per_example.push_back(std::move(*t));
    }
    r.accuracy = r.n_total ? static_cast<double>(r.n_correct) / static_cast<double>(r.n_total) : 0.0;
    r.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();
  };

  try {
    parallel_for(n, config.parallelism, process);
  } catch (const std::exception& e) {
    if (!config.report_dir.empty()) {
      RunReport partial = report;
      finish(partial);
      ReportStore(config.report_dir).save_partial(run_id(config), partial, e.what());
    }
    throw;
  }
  finish(report);
  if (!config.report_dir.empty()) ReportStore(config.report_dir).save(run_id(config), report);
  return report;
}

/// Convenience: load inputs, build the completion client, run.
inline RunReport run_pipeline(const RunConfig& config) {
  const PipelineInputs in = load_inputs(config);
  const auto client = make_completion_client(config);
  return run_pipeline(config, in, *client);
}

// --- sweeps and ablations --------------------------------------------------------

enum class SweepDimension { alpha, n_shot, k_candidates };

inline std::string_view to_string(SweepDimension d) {
  switch (d) {
    case SweepDimension::alpha: return "alpha";
    case SweepDimension::n_shot: return "n_shot";
    case SweepDimension::k_candidates: return "k_candidates";
  }
  return "alpha";
}

inline SweepDimension parse_sweep_dimension(std::string_view s) {
  if (s == "alpha") return SweepDimension::alpha;
  if (s == "n_shot") return SweepDimension::n_shot;
  if (s == "k_candidates") return SweepDimension::k_candidates;
  throw ConfigError("unknown sweep dimension '" + std::string(s) + "'");
}

struct SweepPoint {
  double value = 0.0;
  std::optional<RunReport> report;
  std::string error;  ///< set when the point was invalid or failed
  bool resumed = false;
};

inline RunConfig with_sweep_value(RunConfig config, SweepDimension dim, double value) {
  switch (dim) {
    case SweepDimension::alpha: config.selection.alpha = value; break;
    case SweepDimension::n_shot:
    case SweepDimension::k_candidates: {
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw InvalidArgument(std::string(to_string(dim)) + " must be a positive integer");
      }
      (dim == SweepDimension::n_shot ? config.selection.n_shot : config.selection.k_candidates) =
          static_cast<std::size_t>(value);
      break;
    }
  }
  config.selection.validate();
  return config;
}

/// One run per value, everything else fixed. Invalid points become error
/// entries. With a report directory, finished points are reloaded.
inline std::vector<SweepPoint> sweep(const RunConfig& config, const PipelineInputs& in,
                                     const CompletionClient& client, SweepDimension dim,
                                     const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepPoint> out;
  for (double v : values) {
    SweepPoint point{v, std::nullopt, {}, false};
    try {
      const RunConfig point_config = with_sweep_value(config, dim, v);
      if (!config.report_dir.empty()) {
        if (auto done = ReportStore(config.report_dir).find(run_id(point_config))) {
          point.report = std::move(done);
          point.resumed = true;
          out.push_back(std::move(point));
          continue;
        }
      }
      point.report = run_pipeline(point_config, in, client);
    } catch (const ProviderError&) {
      throw;
    } catch (const Error& e) {
      point.error = e.what();
    }
    out.push_back(std::move(point));
  }
  return out;
}

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::random, Method::topk, Method::topk_l2d,
                                           Method::wo_sem, Method::wo_l2d};
  return methods;
}

/// Every method on the same inputs. Methods that need label distributions
/// are skipped when none are loaded.
inline std::vector<std::pair<Method, RunReport>> ablate(const RunConfig& config,
                                                        const PipelineInputs& in,
                                                        const CompletionClient& client) {
  std::vector<std::pair<Method, RunReport>> out;
  for (Method m : all_methods()) {
    if (method_needs_distributions(m) && !in.pool_distributions) continue;
    RunConfig c = config;
    c.method = m;
    out.emplace_back(m, run_pipeline(c, in, client));
  }
  return out;
}

}  // namespace l2d
