#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "afg/example.hpp"
#include "afg/model/config.hpp"

namespace afg::model {

// Closed-vocabulary tokenizer built from a corpus. Units are single bytes
// (char) or whitespace-separated words with each ASCII punctuation mark as
// its own unit (word). Ids 0..3 are reserved.
class Tokenizer {
 public:
  static constexpr int kPad = 0;  // also the decoder start symbol
  static constexpr int kEos = 1;
  static constexpr int kSep = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  Tokenizer() = default;
  Tokenizer(TokenizerKind kind, std::vector<std::string> units);

  // Vocabulary = sorted distinct units of all texts.
  static Tokenizer build(TokenizerKind kind, std::span<const std::string> texts);
  // Every query, answer, passage and pseudo-answer text of the splits.
  static Tokenizer build(TokenizerKind kind, std::span<const Split* const> splits);

  TokenizerKind kind() const { return kind_; }
  int vocab_size() const { return static_cast<int>(units_.size()) + kReserved; }
  const std::vector<std::string>& units() const { return units_; }

  std::vector<std::string> split_units(std::string_view text) const;
  std::vector<int> encode(std::string_view text) const;
  // Drops reserved ids; words are joined with single spaces.
  std::string decode(std::span<const int> ids) const;

 private:
  TokenizerKind kind_ = TokenizerKind::kWord;
  std::vector<std::string> units_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace afg::model
