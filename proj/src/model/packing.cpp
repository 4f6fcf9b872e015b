#include "afg/model/packing.hpp"

#include <algorithm>
#include <numeric>

#include "afg/error.hpp"

namespace afg::model {
namespace {

struct Field {
  FieldKind kind;
  int passage_index;
  std::vector<int> ids;
};

std::vector<int> encode_field(const Tokenizer& tokenizer, std::string_view text) {
  auto ids = tokenizer.encode(text);
  if (ids.empty()) ids.push_back(Tokenizer::kUnk);
  return ids;
}

FieldedInput assemble(std::vector<Field> fields, int max_input_len) {
  auto total = [&]() {
    std::size_t n = fields.size() - 1;  // separators
    for (const auto& f : fields) n += f.ids.size();
    return n;
  };
  const auto cap = static_cast<std::size_t>(max_input_len);
  while (total() > cap) {
    // Longest passage first; on ties the lower-ranked (later) one.
    Field* victim = nullptr;
    for (auto& f : fields) {
      if (f.kind == FieldKind::kPassage && f.ids.size() > 1 &&
          (!victim || f.ids.size() >= victim->ids.size())) {
        victim = &f;
      }
    }
    if (!victim) {
      for (auto& f : fields) {
        if (f.kind == FieldKind::kPseudo && f.ids.size() > 1) victim = &f;
      }
    }
    if (!victim) {
      throw DataError("pack_input: max_input_len=" + std::to_string(max_input_len) +
                      " cannot hold the query and one token per field");
    }
    victim->ids.pop_back();
  }

  FieldedInput out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.ids.push_back(Tokenizer::kSep);
    Span span;
    span.kind = fields[i].kind;
    span.passage_index = fields[i].passage_index;
    span.begin = out.ids.size();
    out.ids.insert(out.ids.end(), fields[i].ids.begin(), fields[i].ids.end());
    span.end = out.ids.size();
    out.spans.push_back(span);
  }
  return out;
}

}  // namespace

const Span* FieldedInput::query_span() const {
  for (const auto& s : spans) {
    if (s.kind == FieldKind::kQuery) return &s;
  }
  return nullptr;
}

const Span* FieldedInput::pseudo_span() const {
  for (const auto& s : spans) {
    if (s.kind == FieldKind::kPseudo) return &s;
  }
  return nullptr;
}

std::vector<const Span*> FieldedInput::passage_spans() const {
  std::vector<const Span*> out;
  for (const auto& s : spans) {
    if (s.kind == FieldKind::kPassage) out.push_back(&s);
  }
  return out;
}

std::vector<int> silver_kept_passages(const Example& example) {
  if (!example.silver) {
    throw PrerequisiteError("example '" + example.id +
                            "' has no silver labels; SILVER mode needs `label` first");
  }
  std::vector<int> order(example.passages.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return example.passages[a].rank < example.passages[b].rank;
  });
  std::vector<int> kept;
  for (int i : order) {
    if (example.silver->passage_labels[i] == 1) kept.push_back(i);
  }
  if (kept.empty() && !order.empty()) kept.push_back(order.front());
  return kept;
}

FieldedInput pack_input(const Example& example, Mode mode, const Tokenizer& tokenizer,
                        int max_input_len) {
  if (example.query.empty()) {
    throw DataError("example '" + example.id + "': empty query cannot be packed");
  }
  if (!example.pseudo) {
    throw PrerequisiteError("example '" + example.id +
                            "' has no pseudo-answer; run `pseudo` first");
  }
  std::vector<int> passages;
  if (mode == Mode::kSilver) {
    passages = silver_kept_passages(example);
  } else {
    passages.resize(example.passages.size());
    std::iota(passages.begin(), passages.end(), 0);
    std::sort(passages.begin(), passages.end(), [&](int a, int b) {
      return example.passages[a].rank < example.passages[b].rank;
    });
  }

  std::vector<Field> fields;
  fields.push_back({FieldKind::kQuery, -1, encode_field(tokenizer, example.query)});
  fields.push_back({FieldKind::kPseudo, -1, encode_field(tokenizer, example.pseudo->text)});
  for (int i : passages) {
    fields.push_back({FieldKind::kPassage, i, encode_field(tokenizer, example.passages[i].text)});
  }
  return assemble(std::move(fields), max_input_len);
}

FieldedInput pack_query_context(std::string_view query, std::optional<std::string_view> context,
                                const Tokenizer& tokenizer, int max_input_len) {
  if (query.empty()) throw DataError("pack_query_context: empty query");
  std::vector<Field> fields;
  fields.push_back({FieldKind::kQuery, -1, encode_field(tokenizer, query)});
  if (context) fields.push_back({FieldKind::kPassage, 0, encode_field(tokenizer, *context)});
  return assemble(std::move(fields), max_input_len);
}

void validate(const FieldedInput& input) {
  std::vector<bool> covered(input.ids.size(), false);
  std::size_t prev_end = 0;
  for (const auto& s : input.spans) {
    if (s.begin >= s.end || s.end > input.ids.size() || s.begin < prev_end) {
      throw DataError("fielded input: spans are empty, overlapping or out of order");
    }
    for (std::size_t i = s.begin; i < s.end; ++i) covered[i] = true;
    prev_end = s.end;
  }
  for (std::size_t i = 0; i < input.ids.size(); ++i) {
    if (!covered[i] && input.ids[i] != input.sep_id) {
      throw DataError("fielded input: token " + std::to_string(i) + " is outside every span");
    }
  }
}

}  // namespace afg::model
