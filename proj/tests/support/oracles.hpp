#pragma once

// Brute-force reference implementations used to cross-check the library.
// They share no code with it: normalization is re-derived character by
// character, overlaps are computed by sorting, and substring search is a
// naive double loop.

#include <algorithm>
#include <cctype>
#include <iterator>
#include <cmath>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline bool is_punct(char c) {
  static const std::string p = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  return p.find(c) != std::string::npos;
}

inline std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_punct(c)) continue;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  std::vector<std::string> kept;
  for (auto& w : out) {
    if (w != "a" && w != "an" && w != "the") kept.push_back(w);
  }
  return kept;
}

inline std::string joined(const std::string& text) {
  std::string s;
  for (const auto& w : words(text)) s += (s.empty() ? "" : " ") + w;
  return s;
}

inline bool naive_contains(const std::string& hay, const std::string& needle) {
  if (needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size() && ok; ++j) ok = hay[i + j] == needle[j];
    if (ok) return true;
  }
  return false;
}

inline int strinc(const std::string& context, const std::vector<std::string>& golds) {
  const std::string c = joined(context);
  for (const auto& g : golds) {
    const std::string n = joined(g);
    if (!n.empty() && naive_contains(c, n)) return 1;
  }
  return 0;
}

inline std::vector<std::string> sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    cur.push_back(text[i]);
    const bool end = (text[i] == '.' || text[i] == '?' || text[i] == '!') && i + 1 < text.size() &&
                     std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (end) {
      out.push_back(cur);
      cur.clear();
    }
  }
  out.push_back(cur);
  return out;
}

inline double lexical_score(const std::string& context, const std::vector<std::string>& golds) {
  double best = 0.0;
  for (const auto& s : sentences(context)) {
    const auto sw = words(s);
    const std::set<std::string> sentence(sw.begin(), sw.end());
    for (const auto& g : golds) {
      const auto gw = words(g);
      const std::set<std::string> answer(gw.begin(), gw.end());
      if (answer.empty()) continue;
      int hit = 0;
      for (const auto& w : answer) hit += sentence.count(w) ? 1 : 0;
      best = std::max(best, static_cast<double>(hit) / answer.size());
    }
  }
  return best;
}

inline double f1(const std::string& pred, const std::string& gold) {
  auto p = words(pred);
  auto g = words(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::sort(p.begin(), p.end());
  std::sort(g.begin(), g.end());
  std::vector<std::string> common;
  std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double prec = static_cast<double>(common.size()) / p.size();
  const double rec = static_cast<double>(common.size()) / g.size();
  return 2 * prec * rec / (prec + rec);
}

}  // namespace oracle
