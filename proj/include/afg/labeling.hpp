#pragma once

// Silver "contains the answer" labels for every passage and the
// pseudo-answer, by string inclusion, lexical overlap, or the likelihood
// ratio of the gold answer with and without the context (CXMI).

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afg/example.hpp"
#include "afg/model/model.hpp"

namespace afg::labeling {

struct LabelConfig {
  LabelMethod method = LabelMethod::kStrinc;
  double t0 = 0.5;     // CXMI threshold, in (0,1)
  double t_lex = 0.5;  // LEXICAL threshold, in (0,1]
  // Sentence boundary rule for LEXICAL; only "punct_space" (., ?, ! followed
  // by whitespace) is defined.
  std::string sentence_split = "punct_space";

  void validate() const;  // throws ConfigError
};

std::vector<std::string> split_sentences(std::string_view text);

// 1 iff a normalized gold answer is a substring of the normalized context.
int strinc_label(std::string_view context, std::span<const std::string> golds);

struct LexicalResult {
  int label = 0;
  double score = 0.0;
};

// score = max over sentences and golds of |set(gold) & set(sentence)| /
// |set(gold)| on normalized unigrams; label = score >= t_lex. Golds that
// normalize to nothing are skipped; DataError if all of them do.
LexicalResult lexical_label(std::string_view context, std::span<const std::string> golds,
                            double t_lex);

// r / (1 + r) with r = exp(with_context - without_context), kept strictly
// inside (0, 1).
double cxmi_from_log_probs(double log_prob_with, double log_prob_without);

// Likelihood ratio of `gold` under the model given (query, context) versus
// the query alone. A missing context scores 0.5.
double cxmi_score(std::string_view query, std::string_view gold,
                  std::optional<std::string_view> context, const model::Model& lm);

// Labels all K passages and the pseudo-answer with config.method. CXMI
// needs `lm`; every method needs the pseudo-answer (PrerequisiteError).
SilverLabels label_example(const Example& example, const LabelConfig& config,
                           const model::Model* lm = nullptr);

// label_example on every example, attaching the result as example.silver.
void label_split(Split& split, const LabelConfig& config, const model::Model* lm = nullptr);

}  // namespace afg::labeling
