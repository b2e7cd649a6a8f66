#pragma once

// Prompt rendering and verbalizer parsing.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l2d/corpus.hpp"
#include "l2d/error.hpp"
#include "l2d/jsonl.hpp"

namespace l2d {

inline constexpr int kAbstain = -1;

/// A pattern split around its placeholders at construction time, so text
/// that happens to contain "{verbalizer}" is never re-expanded.
class Pattern {
 public:
  Pattern() = default;

  Pattern(std::string source, std::vector<std::string_view> placeholders)
      : source_(std::move(source)) {
    std::size_t pos = 0;
    std::vector<std::pair<std::size_t, std::string_view>> hits;
    for (auto ph : placeholders) {
      const auto first = source_.find(ph);
      if (first == std::string::npos) {
        throw InvalidArgument("pattern is missing placeholder " + std::string(ph));
      }
      if (source_.find(ph, first + 1) != std::string::npos) {
        throw InvalidArgument("placeholder " + std::string(ph) + " appears more than once");
      }
      hits.emplace_back(first, ph);
    }
    std::sort(hits.begin(), hits.end());
    for (const auto& [at, ph] : hits) {
      literals_.push_back(source_.substr(pos, at - pos));
      slots_.emplace_back(ph);
      pos = at + ph.size();
    }
    literals_.push_back(source_.substr(pos));
  }

  const std::string& source() const noexcept { return source_; }

  /// `values` is looked up by placeholder name ("{text}" etc).
  template <typename Lookup>
  std::string render(Lookup&& value_of) const {
    std::string out = literals_.front();
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      out += value_of(slots_[i]);
      out += literals_[i + 1];
    }
    return out;
  }

 private:
  std::string source_;
  std::vector<std::string> literals_;
  std::vector<std::string> slots_;
};

class PromptTemplate {
 public:
  PromptTemplate() = default;

  PromptTemplate(std::string task_name, std::string demo_pattern, std::string query_pattern,
                 std::string separator, std::optional<std::string> instruction = std::nullopt,
                 std::size_t num_classes = 0)
      : task_name_(std::move(task_name)),
        demo_(std::move(demo_pattern), {"{text}", "{verbalizer}"}),
        query_(std::move(query_pattern), {"{text}"}),
        separator_(std::move(separator)),
        instruction_(std::move(instruction)),
        num_classes_(num_classes) {}

  const std::string& task_name() const noexcept { return task_name_; }
  const std::string& demo_pattern() const noexcept { return demo_.source(); }
  const std::string& query_pattern() const noexcept { return query_.source(); }
  const std::string& separator() const noexcept { return separator_; }
  const std::optional<std::string>& instruction() const noexcept { return instruction_; }
  /// 0 when the template fits any class count.
  std::size_t num_classes() const noexcept { return num_classes_; }

  std::string render_demo(std::string_view text, std::string_view verbalizer) const {
    return demo_.render([&](std::string_view slot) { return slot == "{text}" ? text : verbalizer; });
  }

  std::string render_query(std::string_view text) const {
    return query_.render([&](std::string_view) { return text; });
  }

 private:
  std::string task_name_;
  Pattern demo_;
  Pattern query_;
  std::string separator_;
  std::optional<std::string> instruction_;
  std::size_t num_classes_ = 0;
};

inline PromptTemplate template_from_json(const Json& j, const std::string& source = "template") {
  try {
    std::optional<std::string> instruction;
    if (j.contains("instruction") && !j.at("instruction").is_null()) {
      instruction = j.at("instruction").get<std::string>();
    }
    return PromptTemplate(j.at("task_name").get<std::string>(),
                          j.at("demo_pattern").get<std::string>(),
                          j.at("query_pattern").get<std::string>(),
                          j.value("separator", std::string("\n\n")), std::move(instruction),
                          j.value("num_classes", std::size_t{0}));
  } catch (const Json::exception& e) {
    throw ParseError(source, 0, e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 0, e.what());
  }
}

inline Json template_to_json(const PromptTemplate& t) {
  Json j{{"task_name", t.task_name()},
         {"demo_pattern", t.demo_pattern()},
         {"query_pattern", t.query_pattern()},
         {"separator", t.separator()}};
  if (t.instruction()) j["instruction"] = *t.instruction();
  if (t.num_classes()) j["num_classes"] = t.num_classes();
  return j;
}

inline PromptTemplate load_template(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(io::read_file(path));
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return template_from_json(j, path.string());
}

/// Built-in templates for the four task families: sentiment, subjectivity,
/// topic, nli.
inline PromptTemplate default_template(std::string_view family) {
  if (family == "sentiment") {
    return {"sentiment", "Review: {text}\nSentiment: {verbalizer}", "Review: {text}\nSentiment:",
            "\n\n", "Classify the sentiment of each review."};
  }
  if (family == "subjectivity") {
    return {"subjectivity", "Input: {text}\nType: {verbalizer}", "Input: {text}\nType:", "\n\n",
            "Decide whether each input is objective or subjective."};
  }
  if (family == "topic") {
    return {"topic", "Article: {text}\nTopic: {verbalizer}", "Article: {text}\nTopic:", "\n\n",
            "Classify the topic of each news article."};
  }
  if (family == "nli") {
    return {"nli", "{text}\nRelation: {verbalizer}", "{text}\nRelation:", "\n\n",
            "Each premise and hypothesis are joined by [SEP]. Give their relation."};
  }
  throw InvalidArgument("unknown template family '" + std::string(family) + "'");
}

struct Demonstration {
  std::string text;
  std::string verbalizer;
};

/// Instruction, demonstrations in the given order, then the query, joined
/// by the template separator.
inline std::string render_prompt(const PromptTemplate& tmpl, std::span<const Demonstration> demos,
                                 const Example& query, bool allow_zero_shot = false) {
  if (demos.empty() && !allow_zero_shot) {
    throw InvalidArgument("render_prompt: no demonstrations and zero-shot is not enabled");
  }
  std::string out;
  auto append = [&](const std::string& part) {
    if (!out.empty()) out += tmpl.separator();
    out += part;
  };
  if (tmpl.instruction() && !tmpl.instruction()->empty()) append(*tmpl.instruction());
  for (const auto& d : demos) append(tmpl.render_demo(d.text, d.verbalizer));
  append(tmpl.render_query(query.text));
  return out;
}

namespace detail {
inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}
}  // namespace detail

/// Index of the verbalizer that appears first (as a whole word,
/// case-insensitively) in the trimmed output; the longest wins on a shared
/// start. kAbstain when none appears.
inline int parse_prediction(std::string_view raw_output, const LabelMap& label_map) noexcept {
  try {
    const auto first = raw_output.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return kAbstain;
    const auto last = raw_output.find_last_not_of(" \t\r\n");
    const std::string text = detail::ascii_lower(raw_output.substr(first, last - first + 1));

    int best = kAbstain;
    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    for (const auto& c : label_map.classes()) {
      const std::string needle = detail::ascii_lower(c.verbalizer);
      for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
        const bool left_ok = pos == 0 || !detail::is_word_char(text[pos - 1]) ||
                             !detail::is_word_char(needle.front());
        const std::size_t end = pos + needle.size();
        const bool right_ok = end == text.size() || !detail::is_word_char(text[end]) ||
                              !detail::is_word_char(needle.back());
        if (!left_ok || !right_ok) continue;
        if (pos < best_pos || (pos == best_pos && needle.size() > best_len)) {
          best = static_cast<int>(c.index);
          best_pos = pos;
          best_len = needle.size();
        }
        break;
      }
    }
    return best;
  } catch (...) {
    return kAbstain;
  }
}

}  // namespace l2d
