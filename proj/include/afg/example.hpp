#pragma once

// Data model shared by every stage of the pipeline. One Example is one task
// instance: a query, its gold answers, the retrieved passages, and the
// optional pseudo-answer and silver labels attached by later stages.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace afg {

enum class TaskKind { kQa, kFact, kDialogue };

enum class PromptKind { kConcise, kSpeculative, kReasoned };

enum class PseudoSource { kSimulator, kImported };

enum class LabelMethod { kStrinc, kLexical, kCxmi };

// Input configuration for packing, training and evaluation.
//  kFull   all passages, classification loss disabled
//  kE2e    all passages, joint generation + classification loss
//  kSilver only passages whose silver label is 1
enum class Mode { kFull, kE2e, kSilver };

inline constexpr std::string_view kSupports = "SUPPORTS";
inline constexpr std::string_view kRefutes = "REFUTES";

struct Passage {
  std::string pid;
  std::string title;
  std::string text;
  int rank = 0;
  double score = 0.0;

  bool operator==(const Passage&) const = default;
};

struct PseudoAnswer {
  std::string text;
  PromptKind prompt_kind = PromptKind::kConcise;
  PseudoSource source = PseudoSource::kSimulator;

  bool operator==(const PseudoAnswer&) const = default;
};

struct SilverLabels {
  std::vector<int> passage_labels;
  int pseudo_label = 0;
  LabelMethod method = LabelMethod::kStrinc;
  std::vector<double> scores;
  double pseudo_score = 0.0;

  bool operator==(const SilverLabels&) const = default;
};

struct Example {
  std::string id;
  TaskKind task_kind = TaskKind::kQa;
  std::string query;
  std::vector<std::string> gold_answers;
  std::vector<Passage> passages;
  std::optional<PseudoAnswer> pseudo;
  std::optional<SilverLabels> silver;

  bool operator==(const Example&) const = default;
};

using Split = std::vector<Example>;

std::string_view to_string(TaskKind kind);
std::string_view to_string(PromptKind kind);
std::string_view to_string(PseudoSource source);
std::string_view to_string(LabelMethod method);
std::string_view to_string(Mode mode);

// Parsers throw ConfigError on an unknown name.
TaskKind parse_task_kind(std::string_view name);
PromptKind parse_prompt_kind(std::string_view name);
PseudoSource parse_pseudo_source(std::string_view name);
LabelMethod parse_label_method(std::string_view name);
Mode parse_mode(std::string_view name);

// Checks the Example invariants; throws DataError naming the example id and
// the offending field.
void validate(const Example& example);

}  // namespace afg
