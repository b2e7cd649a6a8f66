#pragma once

// Labeled corpora: label maps, JSON-lines ingestion, splits, label
// perturbation and out-of-domain pool/test pairing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "l2d/error.hpp"
#include "l2d/jsonl.hpp"
#include "l2d/rng.hpp"

namespace l2d {

struct ClassInfo {
  std::size_t index = 0;
  std::string name;
  std::string verbalizer;

  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

/// Ordered task classes with the word rendered for each in prompts.
class LabelMap {
 public:
  LabelMap() = default;

  explicit LabelMap(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2) throw InvalidArgument("label map needs at least 2 classes");
    std::unordered_set<std::string> names;
    std::unordered_set<std::string> verbalizers;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      const auto& c = classes_[i];
      if (c.index != i) throw InvalidArgument("label map indices must be 0..n-1 in order");
      if (c.name.empty() || c.verbalizer.empty()) {
        throw InvalidArgument("label map class " + std::to_string(i) + " has an empty field");
      }
      if (!names.insert(c.name).second) throw InvalidArgument("duplicate class name " + c.name);
      if (!verbalizers.insert(c.verbalizer).second) {
        throw InvalidArgument("duplicate verbalizer " + c.verbalizer);
      }
    }
  }

  /// Classes whose name doubles as verbalizer.
  static LabelMap from_names(const std::vector<std::string>& names) {
    std::vector<ClassInfo> classes;
    for (std::size_t i = 0; i < names.size(); ++i) classes.push_back({i, names[i], names[i]});
    return LabelMap(std::move(classes));
  }

  std::size_t num_classes() const noexcept { return classes_.size(); }
  const std::vector<ClassInfo>& classes() const noexcept { return classes_; }
  const ClassInfo& operator[](std::size_t i) const { return classes_.at(i); }
  const std::string& verbalizer(std::size_t i) const { return classes_.at(i).verbalizer; }

  std::optional<std::size_t> index_of_name(std::string_view name) const {
    for (const auto& c : classes_) {
      if (c.name == name) return c.index;
    }
    return std::nullopt;
  }

  /// Same classes, new verbalizers.
  LabelMap with_verbalizers(const std::vector<std::string>& verbalizers) const {
    if (verbalizers.size() != classes_.size()) {
      throw ClassCountError(classes_.size(), verbalizers.size(), "with_verbalizers");
    }
    auto classes = classes_;
    for (std::size_t i = 0; i < classes.size(); ++i) classes[i].verbalizer = verbalizers[i];
    return LabelMap(std::move(classes));
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<ClassInfo> classes_;
};

/// Label map file: {"classes": [{"name": ..., "verbalizer": ...}, ...]}. A
/// class may also be a bare string (name and verbalizer alike) and may carry
/// an explicit "index", which must match its position.
inline LabelMap label_map_from_json(const Json& j, const std::string& source = "label map") {
  const Json* list = &j;
  if (j.is_object()) {
    if (!j.contains("classes")) throw ParseError(source, 0, "missing \"classes\"");
    list = &j.at("classes");
  }
  if (!list->is_array()) throw ParseError(source, 0, "\"classes\" must be an array");
  std::vector<ClassInfo> classes;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const Json& c = (*list)[i];
    ClassInfo info{i, {}, {}};
    if (c.is_string()) {
      info.name = info.verbalizer = c.get<std::string>();
    } else if (c.is_object()) {
      if (c.contains("index") && c.at("index").get<std::size_t>() != i) {
        throw ParseError(source, 0, "class index " + c.at("index").dump() + " out of order");
      }
      info.name = c.at("name").get<std::string>();
      info.verbalizer = c.value("verbalizer", info.name);
    } else {
      throw ParseError(source, 0, "class entry must be a string or object");
    }
    classes.push_back(std::move(info));
  }
  try {
    return LabelMap(std::move(classes));
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 0, e.what());
  }
}

inline Json label_map_to_json(const LabelMap& map) {
  Json classes = Json::array();
  for (const auto& c : map.classes()) {
    classes.push_back({{"index", c.index}, {"name", c.name}, {"verbalizer", c.verbalizer}});
  }
  return Json{{"classes", std::move(classes)}};
}

inline LabelMap load_label_map(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(io::read_file(path));
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return label_map_from_json(j, path.string());
}

inline void write_label_map(const LabelMap& map, const std::filesystem::path& path) {
  io::write_file_atomic(path, label_map_to_json(map).dump(2) + "\n");
}

struct Example {
  std::string id;
  std::string text;
  std::size_t label = 0;
  Json meta;  ///< null when absent

  friend bool operator==(const Example& a, const Example& b) {
    return a.id == b.id && a.text == b.text && a.label == b.label && a.meta == b.meta;
  }
};

enum class CorpusRole { pool, test, validation };

inline std::string_view to_string(CorpusRole r) {
  switch (r) {
    case CorpusRole::pool: return "pool";
    case CorpusRole::test: return "test";
    case CorpusRole::validation: return "validation";
  }
  return "pool";
}

inline constexpr std::string_view kPairSeparator = " [SEP] ";

struct Corpus {
  std::string name;
  LabelMap label_map;
  std::vector<Example> examples;
  CorpusRole role = CorpusRole::pool;
  std::string pair_separator{kPairSeparator};
  std::size_t warnings = 0;

  std::size_t size() const noexcept { return examples.size(); }

  /// Throws unless ids are unique and every label is valid.
  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& ex : examples) {
      if (ex.id.empty()) throw InvalidArgument("example with empty id in " + name);
      if (ex.text.empty()) throw InvalidArgument("example '" + ex.id + "' has empty text");
      if (ex.label >= label_map.num_classes()) {
        throw InvalidArgument("example '" + ex.id + "' has label " + std::to_string(ex.label) +
                              " outside the label map");
      }
      if (!seen.insert(ex.id).second) throw InvalidArgument("duplicate example id '" + ex.id + "'");
    }
  }

  const Example* find(const std::string& id) const {
    for (const auto& ex : examples) {
      if (ex.id == id) return &ex;
    }
    return nullptr;
  }
};

/// Reads a JSON-lines corpus: {"id", "text", "label", "meta"?}. Sentence
/// pairs may be given as "text_a"/"text_b" and are joined with the corpus
/// pair separator. Labels resolve by index, then by class name.
inline Corpus load_corpus(const std::filesystem::path& path, const LabelMap& label_map,
                          CorpusRole role = CorpusRole::pool, std::string name = {}) {
  Corpus corpus;
  corpus.name = name.empty() ? path.stem().string() : std::move(name);
  corpus.label_map = label_map;
  corpus.role = role;
  std::unordered_set<std::string> seen;
  const std::string source = path.string();

  io::for_each_record(path, [&](const Json& rec, std::size_t line) {
    Example ex;
    if (!rec.contains("id") || !rec.at("id").is_string()) {
      throw ParseError(source, line, "missing string \"id\"");
    }
    ex.id = rec.at("id").get<std::string>();
    if (rec.contains("text")) {
      ex.text = rec.at("text").get<std::string>();
    } else if (rec.contains("text_a") && rec.contains("text_b")) {
      ex.text = rec.at("text_a").get<std::string>() + corpus.pair_separator +
                rec.at("text_b").get<std::string>();
    } else {
      throw ParseError(source, line, "missing \"text\"");
    }
    if (ex.text.empty()) throw ParseError(source, line, "empty text for id '" + ex.id + "'");

    if (!rec.contains("label")) throw ParseError(source, line, "missing \"label\"");
    const Json& lab = rec.at("label");
    if (lab.is_number_integer() || lab.is_number_unsigned()) {
      const auto v = lab.get<std::int64_t>();
      if (v < 0 || static_cast<std::size_t>(v) >= label_map.num_classes()) {
        throw ParseError(source, line, "unknown label " + lab.dump());
      }
      ex.label = static_cast<std::size_t>(v);
    } else if (lab.is_string()) {
      auto idx = label_map.index_of_name(lab.get<std::string>());
      if (!idx) throw ParseError(source, line, "unknown label " + lab.dump());
      ex.label = *idx;
    } else {
      throw ParseError(source, line, "label must be an integer or a class name");
    }

    if (rec.contains("meta") && !rec.at("meta").is_null()) {
      if (!rec.at("meta").is_object()) throw ParseError(source, line, "\"meta\" must be an object");
      ex.meta = rec.at("meta");
    }
    if (!seen.insert(ex.id).second) throw ParseError(source, line, "duplicate id '" + ex.id + "'");
    corpus.examples.push_back(std::move(ex));
  });

  if (corpus.examples.empty()) ++corpus.warnings;
  return corpus;
}

inline std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& ex : corpus.examples) {
    Json rec{{"id", ex.id}, {"text", ex.text}, {"label", ex.label}};
    if (!ex.meta.is_null()) rec["meta"] = ex.meta;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_corpus(corpus));
}

/// Seeded shuffle, then the first round(fraction * N) examples form the
/// first part (role pool) and the rest the second (role validation).
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction,
                                              std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  }
  const std::size_t n = corpus.size();
  if (n < 2) throw InvalidArgument("split_corpus needs at least 2 examples");
  const auto first_n = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (first_n == 0 || first_n == n) {
    throw InvalidArgument("split of " + std::to_string(n) + " examples at fraction " +
                          std::to_string(train_fraction) + " leaves an empty part");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  auto make = [&](CorpusRole role, std::string suffix) {
    Corpus part;
    part.name = corpus.name + suffix;
    part.label_map = corpus.label_map;
    part.role = role;
    part.pair_separator = corpus.pair_separator;
    return part;
  };
  Corpus first = make(CorpusRole::pool, ".train");
  Corpus second = make(CorpusRole::validation, ".validation");
  for (std::size_t i = 0; i < n; ++i) {
    (i < first_n ? first : second).examples.push_back(corpus.examples[order[i]]);
  }
  return {std::move(first), std::move(second)};
}

enum class PerturbMode { reversed, arbitrary };

inline PerturbMode parse_perturb_mode(std::string_view s) {
  if (s == "reversed") return PerturbMode::reversed;
  if (s == "arbitrary") return PerturbMode::arbitrary;
  throw InvalidArgument("unknown perturbation '" + std::string(s) + "'");
}

inline const std::vector<std::string>& arbitrary_symbols() {
  static const std::vector<std::string> symbols{"foo", "bar", "baz", "qux"};
  return symbols;
}

/// Verbalizers replaced by the fixed symbol list, optionally assigned to
/// classes by a seeded permutation.
inline LabelMap arbitrary_label_map(const LabelMap& map, bool shuffle_symbols = false,
                                    std::uint64_t seed = 0) {
  const auto& symbols = arbitrary_symbols();
  if (map.num_classes() > symbols.size()) {
    throw InvalidArgument("arbitrary symbols support at most " + std::to_string(symbols.size()) +
                          " classes");
  }
  std::vector<std::string> chosen(symbols.begin(),
                                  symbols.begin() + static_cast<std::ptrdiff_t>(map.num_classes()));
  if (shuffle_symbols) Rng(seed).shuffle(chosen);
  return map.with_verbalizers(chosen);
}

/// Returns a perturbed copy. Reversed flips every label of a binary corpus;
/// arbitrary keeps labels and swaps the verbalizers for symbols.
inline Corpus perturb_labels(const Corpus& corpus, PerturbMode mode, std::uint64_t seed = 0,
                             bool shuffle_symbols = false) {
  Corpus out = corpus;
  if (mode == PerturbMode::reversed) {
    if (corpus.label_map.num_classes() != 2) {
      throw InvalidArgument("reversed labels need a binary label map, '" + corpus.name +
                            "' has " + std::to_string(corpus.label_map.num_classes()) +
                            " classes");
    }
    for (auto& ex : out.examples) ex.label = 1 - ex.label;
  } else {
    out.label_map = arbitrary_label_map(corpus.label_map, shuffle_symbols, seed);
  }
  return out;
}

/// Pool drawn from one corpus, evaluation on another, with the class
/// correspondence between their label maps.
struct OodPairing {
  std::string pool_name;
  std::string test_name;
  std::vector<std::size_t> pool_to_test;  ///< pool class index -> test class index
  std::vector<std::size_t> test_to_pool;

  bool is_identity() const {
    for (std::size_t i = 0; i < pool_to_test.size(); ++i) {
      if (pool_to_test[i] != i) return false;
    }
    return true;
  }
};

/// `alignment` lists (pool class name, test class name) pairs; when empty,
/// classes align by identical name.
inline OodPairing make_ood_pair(
    const Corpus& pool, const Corpus& test,
    const std::vector<std::pair<std::string, std::string>>& alignment = {}) {
  const auto n = pool.label_map.num_classes();
  if (n != test.label_map.num_classes()) {
    throw ClassCountError(n, test.label_map.num_classes(),
                          "OOD pairing " + pool.name + " -> " + test.name);
  }
  OodPairing pairing{pool.name, test.name, std::vector<std::size_t>(n, n),
                     std::vector<std::size_t>(n, n)};
  auto bind = [&](std::size_t p, std::size_t t) {
    if (pairing.pool_to_test[p] != n || pairing.test_to_pool[t] != n) {
      throw InvalidArgument("OOD alignment is not one-to-one");
    }
    pairing.pool_to_test[p] = t;
    pairing.test_to_pool[t] = p;
  };
  if (alignment.empty()) {
    for (const auto& c : pool.label_map.classes()) {
      auto t = test.label_map.index_of_name(c.name);
      if (!t) throw InvalidArgument("OOD alignment: no test class named '" + c.name + "'");
      bind(c.index, *t);
    }
  } else {
    for (const auto& [pool_name, test_name] : alignment) {
      auto p = pool.label_map.index_of_name(pool_name);
      auto t = test.label_map.index_of_name(test_name);
      if (!p || !t) {
        throw InvalidArgument("OOD alignment names unknown class '" + (p ? test_name : pool_name) +
                              "'");
      }
      bind(*p, *t);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (pairing.pool_to_test[i] == n) {
        throw InvalidArgument("OOD alignment: missing entry for pool class '" +
                              pool.label_map[i].name + "'");
      }
    }
  }
  return pairing;
}

}  // namespace l2d
