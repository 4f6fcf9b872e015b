#pragma once

// Answer normalization and the per-example metrics (EM, unigram F1,
// accuracy, top-k recall). Normalization is shared with the labeling module
// so silver labels and scores agree on what "contains the answer" means.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afg/example.hpp"

namespace afg::eval {

// SQuAD-style: lowercase, strip ASCII punctuation, drop the articles
// "a", "an", "the" as whole tokens, collapse whitespace.
std::string normalize_answer(std::string_view text);

// Whitespace tokens of normalize_answer(text).
std::vector<std::string> normalized_tokens(std::string_view text);

// True iff some normalized gold answer is a substring of the normalized
// context. Gold answers that normalize to "" never match.
bool contains_any(std::string_view context, std::span<const std::string> golds);

int exact_match(std::string_view pred, std::span<const std::string> golds);

// Multiset token overlap F1, max over golds. If either side normalizes to
// no tokens the score is 1 when both are empty and 0 otherwise.
double unigram_f1(std::string_view pred, std::span<const std::string> golds);

int accuracy(std::string_view pred, std::string_view gold);

// 1 iff any gold answer appears in a passage with rank <= k.
int topk_recall(const Example& example, int k);

// The metric each task is scored with: EM for qa, accuracy for fact,
// unigram F1 for dialogue.
std::string_view task_metric_name(TaskKind kind);
double task_metric(TaskKind kind, std::string_view pred, std::span<const std::string> golds);

}  // namespace afg::eval
