#include "afg/labeling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "afg/error.hpp"
#include "afg/eval.hpp"

namespace afg::labeling {

void LabelConfig::validate() const {
  if (!(t0 > 0.0 && t0 < 1.0)) throw ConfigError("label: t0 must be in (0,1)");
  if (!(t_lex > 0.0 && t_lex <= 1.0)) throw ConfigError("label: t_lex must be in (0,1]");
  if (sentence_split != "punct_space") {
    throw ConfigError("label: unknown sentence_split rule '" + sentence_split + "'");
  }
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool boundary = (c == '.' || c == '?' || c == '!') && i + 1 < text.size() &&
                          std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (boundary) {
      out.emplace_back(text.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < text.size()) out.emplace_back(text.substr(start));
  std::erase_if(out, [](const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  });
  return out;
}

int strinc_label(std::string_view context, std::span<const std::string> golds) {
  return eval::contains_any(context, golds) ? 1 : 0;
}

LexicalResult lexical_label(std::string_view context, std::span<const std::string> golds,
                            double t_lex) {
  std::vector<std::set<std::string>> answers;
  for (const auto& g : golds) {
    auto toks = eval::normalized_tokens(g);
    if (!toks.empty()) answers.emplace_back(toks.begin(), toks.end());
  }
  if (answers.empty()) {
    throw DataError("lexical_label: every gold answer is empty after normalization");
  }
  LexicalResult result;
  for (const auto& sentence : split_sentences(context)) {
    const auto toks = eval::normalized_tokens(sentence);
    const std::set<std::string> words(toks.begin(), toks.end());
    for (const auto& answer : answers) {
      std::size_t hit = 0;
      for (const auto& w : answer) hit += words.count(w);
      result.score = std::max(result.score,
                              static_cast<double>(hit) / static_cast<double>(answer.size()));
    }
  }
  result.label = result.score >= t_lex ? 1 : 0;
  return result;
}

double cxmi_from_log_probs(double log_prob_with, double log_prob_without) {
  const double diff = log_prob_with - log_prob_without;
  const double s = 1.0 / (1.0 + std::exp(-diff));
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(s, lo, hi);
}

double cxmi_score(std::string_view query, std::string_view gold,
                  std::optional<std::string_view> context, const model::Model& lm) {
  const std::vector<int> target = lm.target_tokens(gold);
  const int cap = lm.config().max_input_len;
  const double without =
      lm.seq_log_prob(model::pack_query_context(query, std::nullopt, lm.tokenizer(), cap), target);
  if (!context) return cxmi_from_log_probs(without, without);
  const double with =
      lm.seq_log_prob(model::pack_query_context(query, context, lm.tokenizer(), cap), target);
  return cxmi_from_log_probs(with, without);
}

SilverLabels label_example(const Example& example, const LabelConfig& config,
                           const model::Model* lm) {
  config.validate();
  if (!example.pseudo) {
    throw PrerequisiteError("example '" + example.id +
                            "' has no pseudo-answer; run `pseudo` before `label`");
  }
  if (config.method == LabelMethod::kCxmi && lm == nullptr) {
    throw ConfigError("label: method cxmi needs a generator checkpoint");
  }

  auto score_context = [&](std::string_view context) -> std::pair<int, double> {
    switch (config.method) {
      case LabelMethod::kStrinc: {
        const int l = strinc_label(context, example.gold_answers);
        return {l, static_cast<double>(l)};
      }
      case LabelMethod::kLexical: {
        const auto r = lexical_label(context, example.gold_answers, config.t_lex);
        return {r.label, r.score};
      }
      case LabelMethod::kCxmi: {
        double best = 0.0;
        for (const auto& gold : example.gold_answers) {
          best = std::max(best, cxmi_score(example.query, gold, context, *lm));
        }
        return {best >= config.t0 ? 1 : 0, best};
      }
    }
    return {0, 0.0};
  };

  SilverLabels out;
  out.method = config.method;
  for (const auto& p : example.passages) {
    const auto [label, score] = score_context(p.text);
    out.passage_labels.push_back(label);
    out.scores.push_back(score);
  }
  const auto [label, score] = score_context(example.pseudo->text);
  out.pseudo_label = label;
  out.pseudo_score = score;
  return out;
}

void label_split(Split& split, const LabelConfig& config, const model::Model* lm) {
  for (auto& ex : split) ex.silver = label_example(ex, config, lm);
}

}  // namespace afg::labeling
