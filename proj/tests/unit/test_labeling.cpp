#include <cmath>
#include <random>

#include "afg/error.hpp"
#include "afg/labeling.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace afg;
using namespace afg::labeling;

namespace {

Example labeled_example() {
  Example ex;
  ex.id = "ex-1";
  ex.query = "who wrote hamlet?";
  ex.gold_answers = {"William Shakespeare"};
  ex.passages = {{"p1", "", "Hamlet was written by William Shakespeare.", 1, 2},
                 {"p2", "", "Shakespeare lived in London. William was his first name.", 2, 1},
                 {"p3", "", "Denmark is cold.", 3, 0}};
  ex.pseudo = PseudoAnswer{"shakespeare", PromptKind::kConcise, PseudoSource::kSimulator};
  return ex;
}

}  // namespace

TEST_CASE("STRINC") {
  const std::vector<std::string> golds{"William Shakespeare"};
  CHECK(strinc_label("Hamlet was written by William Shakespeare.", golds) == 1);
  CHECK(strinc_label("Hamlet was written by Marlowe.", golds) == 0);
  CHECK(strinc_label("WILLIAM   shakespeare!", golds) == 1);
  const std::vector<std::string> empty{""};
  CHECK(strinc_label("anything", empty) == 0);
}

TEST_CASE("sentence splitting") {
  const auto s = split_sentences("One. Two? Three! 3.5 stays");
  REQUIRE(s.size() == 4);
  CHECK(s[0] == "One.");
  CHECK(s[3] == " 3.5 stays");
  CHECK(split_sentences("").empty());
}

TEST_CASE("LEXICAL takes the best sentence") {
  const std::vector<std::string> golds{"William Shakespeare"};
  const auto split_across = lexical_label("Shakespeare lived here. William was a name.", golds, 0.5);
  CHECK(split_across.score == doctest::Approx(0.5));
  CHECK(split_across.label == 1);
  CHECK(lexical_label("Shakespeare lived here. William was a name.", golds, 0.75).label == 0);
  CHECK(lexical_label("William Shakespeare.", golds, 1.0).score == 1.0);
  CHECK(lexical_label("nothing relevant", golds, 0.5).score == 0.0);
  const std::vector<std::string> blank{"the"};
  CHECK_THROWS_AS(lexical_label("text", blank, 0.5), DataError);
}

TEST_CASE("CXMI score from log-likelihoods") {
  CHECK(cxmi_from_log_probs(-2.0, -2.0) == 0.5);
  CHECK(cxmi_from_log_probs(std::log(0.8), std::log(0.2)) == doctest::Approx(0.8));
  CHECK(cxmi_from_log_probs(-1.0, -3.0) > 0.5);
  CHECK(cxmi_from_log_probs(-3.0, -1.0) < 0.5);
  const double hi = cxmi_from_log_probs(0.0, -1e6);
  const double lo = cxmi_from_log_probs(-1e6, 0.0);
  CHECK(hi < 1.0);
  CHECK(lo > 0.0);
}

TEST_CASE("label_example labels every passage and the pseudo-answer") {
  const auto ex = labeled_example();
  LabelConfig cfg;
  const auto s = label_example(ex, cfg);
  CHECK(s.passage_labels == std::vector<int>{1, 0, 0});
  CHECK(s.scores == std::vector<double>{1, 0, 0});
  CHECK(s.pseudo_label == 0);
  CHECK(s.method == LabelMethod::kStrinc);

  cfg.method = LabelMethod::kLexical;
  const auto l = label_example(ex, cfg);
  CHECK(l.passage_labels == std::vector<int>{1, 1, 0});
  CHECK(l.pseudo_label == 1);
  CHECK(l.pseudo_score == doctest::Approx(0.5));
}

TEST_CASE("labeling requires the pseudo-answer and a model for CXMI") {
  auto ex = labeled_example();
  LabelConfig cfg;
  cfg.method = LabelMethod::kCxmi;
  CHECK_THROWS_AS(label_example(ex, cfg), ConfigError);
  ex.pseudo.reset();
  cfg.method = LabelMethod::kStrinc;
  try {
    label_example(ex, cfg);
    FAIL("expected PrerequisiteError");
  } catch (const PrerequisiteError& e) {
    CHECK(std::string(e.what()).find("pseudo") != std::string::npos);
  }
  cfg.t0 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("STRINC and LEXICAL agree with brute-force oracles") {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> vocab{"red",  "Red,", "fox",  "the", "an",  "a",    "jumps",
                                       "over", "dog.", "dog",  "x",   "xy",  "blue!", "sky?"};
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> ctx_len(0, 14);
  std::uniform_int_distribution<int> gold_len(1, 3);
  std::uniform_int_distribution<int> n_gold(1, 3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string context;
    for (int i = ctx_len(rng); i > 0; --i) context += vocab[pick(rng)] + " ";
    std::vector<std::string> golds;
    for (int g = n_gold(rng); g > 0; --g) {
      std::string gold;
      for (int i = gold_len(rng); i > 0; --i) gold += (gold.empty() ? "" : " ") + vocab[pick(rng)];
      golds.push_back(gold);
    }
    CHECK(strinc_label(context, golds) == oracle::strinc(context, golds));
    bool any_words = false;
    for (const auto& g : golds) any_words |= !oracle::words(g).empty();
    if (any_words) {
      CHECK(lexical_label(context, golds, 0.5).score ==
            doctest::Approx(oracle::lexical_score(context, golds)));
    }
  }
}
