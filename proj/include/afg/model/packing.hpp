#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "afg/example.hpp"
#include "afg/model/tokenizer.hpp"

namespace afg::model {

enum class FieldKind { kQuery, kPseudo, kPassage };

struct Span {
  FieldKind kind = FieldKind::kQuery;
  int passage_index = -1;  // index into Example::passages for kPassage
  std::size_t begin = 0;   // token range [begin, end)
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

// Token sequence  Q <sep> S <sep> p_1 <sep> ... <sep> p_K  with the span of
// every field.
struct FieldedInput {
  std::vector<int> ids;
  std::vector<Span> spans;
  int sep_id = Tokenizer::kSep;

  const Span* query_span() const;
  const Span* pseudo_span() const;
  std::vector<const Span*> passage_spans() const;
};

// Packs an example in passage-rank order. Over-long inputs are truncated
// one token at a time from the end of the currently longest passage, then
// the pseudo-answer; the query is never truncated. SILVER mode keeps only
// passages labeled 1, or the rank-1 passage when every label is 0.
FieldedInput pack_input(const Example& example, Mode mode, const Tokenizer& tokenizer,
                        int max_input_len);

// Q alone, or Q <sep> context; the context is recorded as a passage span.
FieldedInput pack_query_context(std::string_view query, std::optional<std::string_view> context,
                                const Tokenizer& tokenizer, int max_input_len);

// Passage indices (into Example::passages) that SILVER mode keeps.
std::vector<int> silver_kept_passages(const Example& example);

// Throws DataError if spans overlap, are out of order, or leave a
// non-separator token uncovered.
void validate(const FieldedInput& input);

}  // namespace afg::model
