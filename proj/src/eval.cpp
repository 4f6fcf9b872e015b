#include "afg/eval.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace afg::eval {

std::string normalize_answer(std::string_view text) {
  std::string stripped;
  stripped.reserve(text.size());
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 128 && std::ispunct(u)) continue;
    stripped.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : c);
  }

  std::string out;
  std::size_t i = 0;
  while (i < stripped.size()) {
    while (i < stripped.size() && std::isspace(static_cast<unsigned char>(stripped[i]))) ++i;
    std::size_t j = i;
    while (j < stripped.size() && !std::isspace(static_cast<unsigned char>(stripped[j]))) ++j;
    if (j > i) {
      std::string_view word(stripped.data() + i, j - i);
      if (word != "a" && word != "an" && word != "the") {
        if (!out.empty()) out.push_back(' ');
        out.append(word);
      }
    }
    i = j;
  }
  return out;
}

std::vector<std::string> normalized_tokens(std::string_view text) {
  const std::string norm = normalize_answer(text);
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < norm.size()) {
    std::size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    tokens.emplace_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

bool contains_any(std::string_view context, std::span<const std::string> golds) {
  const std::string norm_context = normalize_answer(context);
  return std::any_of(golds.begin(), golds.end(), [&](const std::string& g) {
    const std::string norm_gold = normalize_answer(g);
    return !norm_gold.empty() && norm_context.find(norm_gold) != std::string::npos;
  });
}

int exact_match(std::string_view pred, std::span<const std::string> golds) {
  const std::string norm_pred = normalize_answer(pred);
  return std::any_of(golds.begin(), golds.end(),
                     [&](const std::string& g) { return normalize_answer(g) == norm_pred; })
             ? 1
             : 0;
}

namespace {

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double unigram_f1(std::string_view pred, std::span<const std::string> golds) {
  const auto pred_tokens = normalized_tokens(pred);
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, f1_single(pred_tokens, normalized_tokens(g)));
  return best;
}

int accuracy(std::string_view pred, std::string_view gold) {
  return normalize_answer(pred) == normalize_answer(gold) ? 1 : 0;
}

int topk_recall(const Example& example, int k) {
  for (const auto& p : example.passages) {
    if (p.rank <= k && contains_any(p.text, example.gold_answers)) return 1;
  }
  return 0;
}

std::string_view task_metric_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kQa: return "em";
    case TaskKind::kFact: return "accuracy";
    case TaskKind::kDialogue: return "f1";
  }
  return "em";
}

double task_metric(TaskKind kind, std::string_view pred, std::span<const std::string> golds) {
  switch (kind) {
    case TaskKind::kQa: return exact_match(pred, golds);
    case TaskKind::kFact: return golds.empty() ? 0.0 : accuracy(pred, golds.front());
    case TaskKind::kDialogue: return unigram_f1(pred, golds);
  }
  return 0.0;
}

}  // namespace afg::eval
