#include "afg/model/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "afg/error.hpp"

namespace afg::model {

Tokenizer::Tokenizer(TokenizerKind kind, std::vector<std::string> units)
    : kind_(kind), units_(std::move(units)) {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (!index_.emplace(units_[i], static_cast<int>(i) + kReserved).second) {
      throw DataError("tokenizer: duplicate unit '" + units_[i] + "'");
    }
  }
}

Tokenizer Tokenizer::build(TokenizerKind kind, std::span<const std::string> texts) {
  Tokenizer probe(kind, {});
  std::set<std::string> units;
  for (const auto& t : texts) {
    for (auto& u : probe.split_units(t)) units.insert(std::move(u));
  }
  return Tokenizer(kind, std::vector<std::string>(units.begin(), units.end()));
}

Tokenizer Tokenizer::build(TokenizerKind kind, std::span<const Split* const> splits) {
  std::vector<std::string> texts;
  for (const Split* split : splits) {
    for (const auto& ex : *split) {
      texts.push_back(ex.query);
      texts.insert(texts.end(), ex.gold_answers.begin(), ex.gold_answers.end());
      for (const auto& p : ex.passages) texts.push_back(p.text);
      if (ex.pseudo) texts.push_back(ex.pseudo->text);
    }
  }
  return build(kind, texts);
}

std::vector<std::string> Tokenizer::split_units(std::string_view text) const {
  std::vector<std::string> out;
  if (kind_ == TokenizerKind::kChar) {
    for (char c : text) out.emplace_back(1, c);
    return out;
  }
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (u < 128 && std::ispunct(u)) {
      flush();
      out.emplace_back(1, c);
    } else {
      word.push_back(c);
    }
  }
  flush();
  return out;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& u : split_units(text)) {
    auto it = index_.find(u);
    ids.push_back(it == index_.end() ? kUnk : it->second);
  }
  return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id < kReserved || id >= vocab_size()) continue;
    if (kind_ == TokenizerKind::kWord && !out.empty()) out.push_back(' ');
    out += units_[static_cast<std::size_t>(id - kReserved)];
  }
  return out;
}

}  // namespace afg::model
