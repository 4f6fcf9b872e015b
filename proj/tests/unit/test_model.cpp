#include <filesystem>
#include <random>

#include "afg/diagnostics.hpp"
#include "afg/error.hpp"
#include "afg/model/checkpoint.hpp"
#include "afg/model/model.hpp"
#include "afg/model/packing.hpp"
#include "doctest.h"

using namespace afg;
using namespace afg::model;

namespace {

Tokenizer tiny_tokenizer() {
  const Split split{diagnostics::tiny_example()};
  const std::vector<const Split*> splits{&split};
  return Tokenizer::build(TokenizerKind::kWord, splits);
}

ModelConfig small_config() {
  ModelConfig c;
  c.d_model = 16;
  c.d_k = 8;
  c.d_ff = 24;
  return c;
}

}  // namespace

TEST_CASE("word tokenizer") {
  const std::vector<std::string> texts{"the cat sat.", "a dog"};
  const auto tok = Tokenizer::build(TokenizerKind::kWord, texts);
  CHECK(tok.vocab_size() == Tokenizer::kReserved + 6);
  CHECK(tok.split_units("the cat, sat.") == std::vector<std::string>{"the", "cat", ",", "sat", "."});
  const auto ids = tok.encode("the dog sat");
  CHECK(tok.decode(ids) == "the dog sat");
  CHECK(tok.encode("zebra")[0] == Tokenizer::kUnk);
}

TEST_CASE("char tokenizer") {
  const std::vector<std::string> texts{"abc"};
  const auto tok = Tokenizer::build(TokenizerKind::kChar, texts);
  CHECK(tok.vocab_size() == Tokenizer::kReserved + 3);
  CHECK(tok.decode(tok.encode("cab")) == "cab");
}

TEST_CASE("packing lays out fields in rank order") {
  auto ex = diagnostics::tiny_example();
  std::swap(ex.passages[0].rank, ex.passages[2].rank);
  const auto tok = tiny_tokenizer();
  const auto in = pack_input(ex, Mode::kE2e, tok, 128);
  CHECK_NOTHROW(validate(in));
  REQUIRE(in.spans.size() == 5);
  CHECK(in.spans[0].kind == FieldKind::kQuery);
  CHECK(in.spans[1].kind == FieldKind::kPseudo);
  CHECK(in.spans[2].passage_index == 2);
  CHECK(in.spans[4].passage_index == 0);
  CHECK(in.ids[in.spans[0].end] == Tokenizer::kSep);
}

TEST_CASE("truncation shortens passages before the pseudo-answer and never the query") {
  const auto ex = diagnostics::tiny_example();
  const auto tok = tiny_tokenizer();
  const auto full = pack_input(ex, Mode::kFull, tok, 128);
  const std::size_t query_len = full.query_span()->length();
  const auto cut = pack_input(ex, Mode::kFull, tok, static_cast<int>(full.ids.size()) - 4);
  CHECK(cut.ids.size() == full.ids.size() - 4);
  CHECK(cut.query_span()->length() == query_len);
  CHECK(cut.pseudo_span()->length() == full.pseudo_span()->length());
  // The two-sentence third passage is the longest and gives up tokens first.
  CHECK(cut.passage_spans()[2]->length() == full.passage_spans()[2]->length() - 4);

  const int minimal = static_cast<int>(query_len) + 1 + 1 + 3 * 2;
  const auto tight = pack_input(ex, Mode::kFull, tok, minimal);
  CHECK(tight.pseudo_span()->length() == 1);
  CHECK(tight.query_span()->length() == query_len);
  CHECK_THROWS_AS(pack_input(ex, Mode::kFull, tok, minimal - 1), DataError);
}

TEST_CASE("SILVER keeps labeled passages with a rank-1 fallback") {
  auto ex = diagnostics::tiny_example();
  const auto tok = tiny_tokenizer();
  CHECK(pack_input(ex, Mode::kSilver, tok, 128).passage_spans().size() == 1);
  ex.silver->passage_labels = {0, 1, 1};
  CHECK(silver_kept_passages(ex) == std::vector<int>{1, 2});
  ex.silver->passage_labels = {0, 0, 0};
  CHECK(silver_kept_passages(ex) == std::vector<int>{0});
  ex.silver.reset();
  CHECK_THROWS_AS(pack_input(ex, Mode::kSilver, tok, 128), PrerequisiteError);
  ex = diagnostics::tiny_example();
  ex.pseudo.reset();
  CHECK_THROWS_AS(pack_input(ex, Mode::kFull, tok, 128), PrerequisiteError);
}

TEST_CASE("model inference shapes and determinism") {
  const auto ex = diagnostics::tiny_example();
  const Model m(small_config(), tiny_tokenizer(), 3);
  const Model same(small_config(), tiny_tokenizer(), 3);
  const auto in = pack_input(ex, Mode::kE2e, m.tokenizer(), 128);
  const auto enc = m.encode(in);
  CHECK(enc.rows() == in.ids.size());
  CHECK(enc.cols() == 16);
  CHECK(enc == same.encode(in));

  const auto pred = m.predict_cls(in);
  REQUIRE(pred.epsilon.size() == 3);
  for (double e : pred.epsilon) {
    CHECK(e > 0.0);
    CHECK(e < 1.0);
  }
  CHECK(pred.xi > 0.0);

  const auto gen = m.generate_greedy(in, 5);
  CHECK(gen.tokens.size() <= 5);
  CHECK(gen.tokens == same.generate_greedy(in, 5).tokens);
  const auto target = m.target_tokens("teal");
  CHECK(target.back() == Tokenizer::kEos);
  CHECK(m.seq_log_prob(in, target) < 0.0);
  const std::vector<int> no_eos{target[0]};
  CHECK_THROWS_AS(m.seq_log_prob(in, no_eos), DataError);
  CHECK_THROWS_AS(m.target_tokens(""), DataError);
}

TEST_CASE("greedy decoding log-probability matches teacher forcing") {
  const auto ex = diagnostics::tiny_example();
  const Model m(small_config(), tiny_tokenizer(), 8);
  const auto in = pack_input(ex, Mode::kE2e, m.tokenizer(), 128);
  const auto gen = m.generate_greedy(in, 6);
  afg::nn::Tape tape(false, false);
  const double forced = m.seq_log_prob(tape, m.encode(tape, in), gen.tokens).item();
  CHECK(gen.log_prob() == doctest::Approx(forced).epsilon(1e-12));
}

TEST_CASE("LoRA: zero init, merge and parameter count") {
  const auto ex = diagnostics::tiny_example();
  Model m(small_config(), tiny_tokenizer(), 4);
  const auto in = pack_input(ex, Mode::kE2e, m.tokenizer(), 128);
  const auto before = m.encode(in);
  const std::vector<std::string> targets{"enc.0.attn.q.w", "enc.1.ffn.fc1.w"};
  m.lora_attach(targets, 2, 4.0, 9);
  CHECK(m.encode(in) == before);
  CHECK(m.param_count(true) == 2 * (16 + 16) + 2 * (16 + 24));
  CHECK_THROWS_AS(m.lora_attach(targets, 2, 4.0, 9), ConfigError);
  const std::vector<std::string> bad{"enc.0.ln1.g"};
  CHECK_THROWS_AS(m.lora_attach(bad, 2, 4.0, 9), ConfigError);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 0.3);
  for (const auto& t : targets) {
    for (double& x : m.params().at(lora_b_name(t)).value.data) x = d(rng);
  }
  const auto adapted = m.encode(in);
  CHECK_FALSE(adapted == before);
  m.lora_merge();
  CHECK(m.adapters().empty());
  const auto merged = m.encode(in);
  for (std::size_t i = 0; i < merged.size(); ++i) {
    CHECK(merged.data[i] == doctest::Approx(adapted.data[i]).epsilon(1e-9));
  }
  CHECK(m.param_count(true) == m.param_count(false));
}

TEST_CASE("checkpoint round trip") {
  const auto ex = diagnostics::tiny_example();
  Model m(small_config(), tiny_tokenizer(), 5);
  const std::vector<std::string> targets{"dec.0.cross.v.w"};
  m.lora_attach(targets, 3, 6.0, 2);
  const auto path = std::filesystem::temp_directory_path() / "afg_unit_model.ckpt";
  save_checkpoint(m, path, {{"note", "unit"}});
  const Model back = load_checkpoint(path);
  CHECK(back.config().vocab_size == m.config().vocab_size);
  CHECK(back.adapters().size() == 1);
  CHECK(back.param_count(true) == m.param_count(true));
  for (const auto& [name, p] : m.params()) {
    CHECK(back.params().at(name).value == p.value);
    CHECK(back.params().at(name).trainable == p.trainable);
  }
  const auto in = pack_input(ex, Mode::kE2e, m.tokenizer(), 128);
  CHECK(back.generate_greedy(in, 4).tokens == m.generate_greedy(in, 4).tokens);
  CHECK(load_checkpoint_meta(path)["note"] == "unit");
  CHECK_THROWS(load_checkpoint(std::filesystem::temp_directory_path() / "afg_missing.ckpt"));
}

TEST_CASE("model config JSON rejects unknown keys") {
  auto j = nlohmann::json(to_json(small_config()));
  CHECK(model_config_from_json(j).d_model == 16);
  j["d_modle"] = 3;
  CHECK_THROWS_AS(model_config_from_json(j), ConfigError);
  ModelConfig bad = small_config();
  bad.n_heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
