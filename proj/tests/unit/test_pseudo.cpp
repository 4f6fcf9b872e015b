#include <filesystem>
#include <fstream>

#include "afg/corpus.hpp"
#include "afg/error.hpp"
#include "afg/labeling.hpp"
#include "afg/pseudo.hpp"
#include "doctest.h"

using namespace afg;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  corpus::SynthConfig cfg;
  corpus::SyntheticWorld world;
  Split split;

  explicit Fixture(double fact_fraction = 0.0) {
    cfg.n_train = 60;
    cfg.n_dev = 4;
    cfg.n_test = 4;
    cfg.fact_fraction = fact_fraction;
    world = corpus::build_world(cfg, 13);
    split = corpus::synth_generate(cfg, 13).train;
  }
};

pseudo::SimulatorConfig always(double p) {
  pseudo::SimulatorConfig c;
  c.p_correct = {p, p, p};
  return c;
}

fs::path write_lines(const std::string& name, const std::vector<std::string>& lines) {
  const fs::path dir = fs::temp_directory_path() / "afg_unit";
  fs::create_directories(dir);
  std::ofstream out(dir / name);
  for (const auto& l : lines) out << l << '\n';
  return dir / name;
}

}  // namespace

TEST_CASE("prompt templates") {
  const std::string q = "what is the color of bako?";
  const auto concise = pseudo::render_prompt(PromptKind::kConcise, q);
  CHECK(concise.find(q) != std::string::npos);
  CHECK(concise.find("short") != std::string::npos);
  const auto reasoned = pseudo::render_prompt(PromptKind::kReasoned, q);
  CHECK(reasoned.find("conclusion") != std::string::npos);
  CHECK(reasoned.find("derivation") != std::string::npos);
  CHECK(pseudo::render_prompt(PromptKind::kSpeculative, q).find("guess") != std::string::npos);
}

TEST_CASE("simulator recall follows p_correct") {
  for (double fact : {0.0, 1.0}) {
    Fixture f(fact);
    pseudo::simulate_split(f.split, always(1.0), f.world, 1);
    CHECK(pseudo::pseudo_recall(f.split) == 1.0);

    pseudo::simulate_split(f.split, always(0.0), f.world, 1);
    CHECK(pseudo::pseudo_recall(f.split) == 0.0);
    labeling::label_split(f.split, labeling::LabelConfig{});
    for (const auto& ex : f.split) CHECK(ex.silver->pseudo_label == 0);
  }
}

TEST_CASE("simulated answers have the requested shape") {
  Fixture f;
  std::mt19937_64 rng(3);
  const auto& ex = f.split[0];
  const auto concise = pseudo::simulate_pseudo(ex, PromptKind::kConcise, always(1.0), &f.world, rng);
  CHECK(concise.text == ex.gold_answers[0]);
  CHECK(concise.source == PseudoSource::kSimulator);
  const auto spec = pseudo::simulate_pseudo(ex, PromptKind::kSpeculative, always(1.0), &f.world, rng);
  CHECK(spec.text.rfind("perhaps", 0) == 0);
  const auto reasoned = pseudo::simulate_pseudo(ex, PromptKind::kReasoned, always(1.0), &f.world, rng);
  CHECK(reasoned.text.find("because") != std::string::npos);
  CHECK(reasoned.prompt_kind == PromptKind::kReasoned);
}

TEST_CASE("simulator needs the world") {
  Fixture f;
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(pseudo::simulate_pseudo(f.split[0], PromptKind::kConcise, always(1.0), nullptr, rng),
                  DataError);
  Example foreign = f.split[0];
  foreign.query = "who wrote hamlet?";
  CHECK_THROWS_WITH_AS(
      pseudo::simulate_pseudo(foreign, PromptKind::kConcise, always(1.0), &f.world, rng),
      doctest::Contains("import"), DataError);
}

TEST_CASE("recall identity with STRINC") {
  Fixture f;
  pseudo::simulate_split(f.split, pseudo::SimulatorConfig{}, f.world, 5);
  double sum = 0;
  for (const auto& ex : f.split) sum += labeling::strinc_label(ex.pseudo->text, ex.gold_answers);
  CHECK(pseudo::pseudo_recall(f.split) == sum / f.split.size());
  f.split[2].pseudo.reset();
  CHECK_THROWS_AS(pseudo::pseudo_recall(f.split), PrerequisiteError);
}

TEST_CASE("import fills pseudo-answers") {
  Fixture f;
  std::vector<std::string> lines;
  for (const auto& ex : f.split) {
    lines.push_back(R"({"id":")" + ex.id + R"(","text":"maybe )" + ex.gold_answers[0] +
                    R"(","prompt_kind":"speculative"})");
  }
  const auto warnings = pseudo::import_pseudo(write_lines("all.jsonl", lines), f.split);
  CHECK(warnings.empty());
  for (const auto& ex : f.split) {
    REQUIRE(ex.pseudo);
    CHECK(ex.pseudo->source == PseudoSource::kImported);
    CHECK(ex.pseudo->prompt_kind == PromptKind::kSpeculative);
  }
  CHECK(pseudo::pseudo_recall(f.split) == 1.0);
}

TEST_CASE("import errors and truncation") {
  Fixture f;
  const std::string id = f.split[0].id;
  CHECK_THROWS_WITH_AS(
      pseudo::import_pseudo(write_lines("unknown.jsonl",
                                        {R"({"id":"nope","text":"x","prompt_kind":"concise"})"}),
                            f.split),
      doctest::Contains("nope"), DataError);
  const std::string line = R"({"id":")" + id + R"(","text":"x","prompt_kind":"concise"})";
  CHECK_THROWS_WITH_AS(pseudo::import_pseudo(write_lines("dup.jsonl", {line, line}), f.split),
                       doctest::Contains("duplicate"), DataError);

  std::string longtext;
  for (int i = 0; i < 250; ++i) longtext += "w" + std::to_string(i) + " ";
  const auto warnings = pseudo::import_pseudo(
      write_lines("long.jsonl",
                  {R"({"id":")" + id + R"(","text":")" + longtext + R"(","prompt_kind":"reasoned"})"}),
      f.split);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("truncated") != std::string::npos);
  CHECK(f.split[0].pseudo->text.rfind("w199") == f.split[0].pseudo->text.size() - 4);
}
