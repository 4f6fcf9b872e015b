#include "afg/example.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <utility>

#include "afg/error.hpp"

namespace afg {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name,
                const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [key, value] : table) {
    if (key == name) return value;
  }
  std::string allowed;
  for (const auto& [key, value] : table) {
    if (!allowed.empty()) allowed += "|";
    allowed += key;
  }
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(name) +
                    "' (expected " + allowed + ")");
}

constexpr std::array<std::pair<std::string_view, TaskKind>, 3> kTaskKinds{{
    {"qa", TaskKind::kQa},
    {"fact", TaskKind::kFact},
    {"dialogue", TaskKind::kDialogue},
}};
constexpr std::array<std::pair<std::string_view, PromptKind>, 3> kPromptKinds{{
    {"concise", PromptKind::kConcise},
    {"speculative", PromptKind::kSpeculative},
    {"reasoned", PromptKind::kReasoned},
}};
constexpr std::array<std::pair<std::string_view, PseudoSource>, 2> kSources{{
    {"simulator", PseudoSource::kSimulator},
    {"imported", PseudoSource::kImported},
}};
constexpr std::array<std::pair<std::string_view, LabelMethod>, 3> kMethods{{
    {"strinc", LabelMethod::kStrinc},
    {"lexical", LabelMethod::kLexical},
    {"cxmi", LabelMethod::kCxmi},
}};
constexpr std::array<std::pair<std::string_view, Mode>, 3> kModes{{
    {"full", Mode::kFull},
    {"e2e", Mode::kE2e},
    {"silver", Mode::kSilver},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value,
                         const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [key, v] : table) {
    if (v == value) return key;
  }
  return "?";
}

std::size_t whitespace_token_count(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string tok; in >> tok;) ++n;
  return n;
}

[[noreturn]] void invalid(const Example& ex, std::string_view field, const std::string& why) {
  throw DataError("example '" + ex.id + "': field '" + std::string(field) + "' " + why);
}

}  // namespace

std::string_view to_string(TaskKind kind) { return name_of(kind, kTaskKinds); }
std::string_view to_string(PromptKind kind) { return name_of(kind, kPromptKinds); }
std::string_view to_string(PseudoSource source) { return name_of(source, kSources); }
std::string_view to_string(LabelMethod method) { return name_of(method, kMethods); }
std::string_view to_string(Mode mode) { return name_of(mode, kModes); }

TaskKind parse_task_kind(std::string_view name) {
  return parse_enum(name, kTaskKinds, "task_kind");
}
PromptKind parse_prompt_kind(std::string_view name) {
  return parse_enum(name, kPromptKinds, "prompt_kind");
}
PseudoSource parse_pseudo_source(std::string_view name) {
  return parse_enum(name, kSources, "pseudo source");
}
LabelMethod parse_label_method(std::string_view name) {
  return parse_enum(name, kMethods, "label method");
}
Mode parse_mode(std::string_view name) { return parse_enum(name, kModes, "mode"); }

void validate(const Example& ex) {
  if (ex.id.empty()) throw DataError("example with empty 'id'");
  if (ex.gold_answers.empty()) invalid(ex, "gold_answers", "must be non-empty");
  if (ex.task_kind == TaskKind::kFact) {
    if (ex.gold_answers.size() != 1) {
      invalid(ex, "gold_answers", "must hold exactly one verdict for a fact example");
    }
    const auto& verdict = ex.gold_answers.front();
    if (verdict != kSupports && verdict != kRefutes) {
      invalid(ex, "gold_answers", "verdict '" + verdict + "' is not SUPPORTS or REFUTES");
    }
  }

  const std::size_t k = ex.passages.size();
  std::vector<const Passage*> by_rank(k, nullptr);
  for (const auto& p : ex.passages) {
    if (p.text.empty()) invalid(ex, "passages.text", "is empty (pid " + p.pid + ")");
    if (p.rank < 1 || static_cast<std::size_t>(p.rank) > k || by_rank[p.rank - 1]) {
      invalid(ex, "passages.rank", "is not a permutation of 1..K");
    }
    by_rank[p.rank - 1] = &p;
  }
  for (std::size_t r = 1; r < k; ++r) {
    if (by_rank[r]->score > by_rank[r - 1]->score) {
      invalid(ex, "passages.score", "increases with rank");
    }
  }

  if (ex.pseudo) {
    if (ex.pseudo->text.empty()) invalid(ex, "pseudo.text", "is empty");
    if (whitespace_token_count(ex.pseudo->text) > 200) {
      invalid(ex, "pseudo.text", "exceeds 200 tokens");
    }
  }

  if (ex.silver) {
    const auto& s = *ex.silver;
    if (s.passage_labels.size() != k) invalid(ex, "silver.passage_labels", "length != K");
    if (s.scores.size() != k) invalid(ex, "silver.scores", "length != K");
    auto bad_label = [](int l) { return l != 0 && l != 1; };
    if (std::any_of(s.passage_labels.begin(), s.passage_labels.end(), bad_label) ||
        bad_label(s.pseudo_label)) {
      invalid(ex, "silver.passage_labels", "must be 0 or 1");
    }
    auto in_range = [&](double v) {
      switch (s.method) {
        case LabelMethod::kStrinc: return v == 0.0 || v == 1.0;
        case LabelMethod::kLexical: return v >= 0.0 && v <= 1.0;
        case LabelMethod::kCxmi: return v > 0.0 && v < 1.0;
      }
      return false;
    };
    if (!std::all_of(s.scores.begin(), s.scores.end(), in_range) ||
        !in_range(s.pseudo_score)) {
      invalid(ex, "silver.scores",
              "out of range for method " + std::string(to_string(s.method)));
    }
  }
}

}  // namespace afg
