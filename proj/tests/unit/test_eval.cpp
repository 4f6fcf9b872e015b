#include <random>

#include "afg/eval.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace afg;
using namespace afg::eval;

TEST_CASE("normalize_answer lowercases, strips punctuation and articles") {
  CHECK(normalize_answer("The  Eiffel Tower!") == "eiffel tower");
  CHECK(normalize_answer("An apple, a day") == "apple day");
  CHECK(normalize_answer("  ") == "");
  CHECK(normalize_answer("theater") == "theater");
}

TEST_CASE("exact match") {
  const std::vector<std::string> golds{"Paris", "City of Light"};
  CHECK(exact_match("paris", golds) == 1);
  CHECK(exact_match("the city of light.", golds) == 1);
  CHECK(exact_match("Lyon", golds) == 0);
  CHECK(exact_match("Paris France", golds) == 0);
}

TEST_CASE("unigram F1") {
  const std::vector<std::string> xyw{"x y w"};
  CHECK(unigram_f1("x y z", xyw) == doctest::Approx(2.0 / 3.0));
  // "a" is an article, so only "b" overlaps.
  const std::vector<std::string> abd{"a b d"};
  CHECK(unigram_f1("a b c", abd) == doctest::Approx(0.5));
  const std::vector<std::string> same{"red fox"};
  CHECK(unigram_f1("red fox", same) == 1.0);
  const std::vector<std::string> dup{"x x y"};
  CHECK(unigram_f1("x y y", dup) == doctest::Approx(2.0 / 3.0));
  const std::vector<std::string> empty{""};
  CHECK(unigram_f1("", empty) == 1.0);
  CHECK(unigram_f1("x", empty) == 0.0);
  const std::vector<std::string> several{"q r", "x y"};
  CHECK(unigram_f1("x y", several) == 1.0);
}

TEST_CASE("accuracy on verdicts") {
  CHECK(accuracy("SUPPORTS", "SUPPORTS") == 1);
  CHECK(accuracy("REFUTES", "SUPPORTS") == 0);
  CHECK(accuracy("supports", "SUPPORTS") == 1);
}

TEST_CASE("top-k recall follows ranks") {
  Example ex;
  ex.gold_answers = {"teal"};
  ex.passages = {{"p1", "", "nothing here", 1, 3},
                 {"p2", "", "still nothing", 2, 2},
                 {"p3", "", "the color is teal.", 3, 1}};
  CHECK(topk_recall(ex, 5) == 1);
  CHECK(topk_recall(ex, 3) == 1);
  CHECK(topk_recall(ex, 2) == 0);
  for (int k = 0; k < 5; ++k) CHECK(topk_recall(ex, k) <= topk_recall(ex, k + 1));
}

TEST_CASE("task metric dispatch") {
  const std::vector<std::string> golds{"teal"};
  CHECK(task_metric_name(TaskKind::kQa) == "em");
  CHECK(task_metric_name(TaskKind::kFact) == "accuracy");
  CHECK(task_metric_name(TaskKind::kDialogue) == "f1");
  CHECK(task_metric(TaskKind::kQa, "Teal.", golds) == 1.0);
}

TEST_CASE("F1 and EM properties on random strings") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> vocab{"x", "y", "z", "the", "w", "v", "Red", "red,"};
  std::uniform_int_distribution<int> len(0, 5);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  auto draw = [&]() {
    std::string s;
    for (int i = len(rng); i > 0; --i) s += vocab[pick(rng)] + " ";
    return s;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const std::string p = draw();
    const std::string g = draw();
    const std::vector<std::string> gs{g};
    const std::vector<std::string> ps{p};
    const double f = unigram_f1(p, gs);
    CHECK(f == doctest::Approx(oracle::f1(p, g)));
    CHECK(f == doctest::Approx(unigram_f1(g, ps)));
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    if (exact_match(p, gs) == 1) CHECK(f == 1.0);
    if (!normalize_answer(p).empty()) {
      CHECK(exact_match(p, ps) == 1);
      CHECK(unigram_f1(p, ps) == 1.0);
    }
  }
}
