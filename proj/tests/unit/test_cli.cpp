#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "afg/cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result afg_run(std::vector<std::string> args) {
  args.insert(args.begin(), "afg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = afg::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "afg_unit_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path small_config(const fs::path& dir) {
  std::ofstream(dir / "c.json")
      << R"({"synth":{"n_train":16,"n_dev":8,"n_test":8},)"
      << R"("model":{"d_model":16,"d_k":8,"d_ff":16,"n_layers_enc":1,"n_layers_dec":1},)"
      << R"("train":{"epochs":1,"batch_size":4}})";
  return dir / "c.json";
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(afg_run({}).code == 1);
  CHECK(afg_run({"frobnicate"}).code == 1);
  CHECK(afg_run({"train", "--mode", "sideways", "--data", "x"}).code == 1);
  CHECK(afg_run({"--help"}).code == 0);
}

TEST_CASE("config typos are rejected") {
  const auto dir = fresh_dir("typo");
  std::ofstream(dir / "bad.json") << R"({"train":{"sigmaa":0.3}})";
  const auto r = afg_run({"synth", "--config", (dir / "bad.json").string(), "--out", (dir / "d").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("sigmaa") != std::string::npos);
}

TEST_CASE("pipeline stages enforce their order") {
  const auto dir = fresh_dir("order");
  const auto cfg = small_config(dir).string();
  const auto data = (dir / "data").string();
  REQUIRE(afg_run({"synth", "--config", cfg, "--seed", "3", "--out", data}).code == 0);
  CHECK(fs::exists(fs::path(data) / "run.json"));
  CHECK(fs::exists(fs::path(data) / "config.json"));

  const auto early = afg_run({"label", "--config", cfg, "--data", data});
  CHECK(early.code == 1);
  CHECK(early.err.find("afg pseudo") != std::string::npos);

  REQUIRE(afg_run({"pseudo", "--config", cfg, "--seed", "3", "--data", data}).code == 0);
  const auto unlabeled = afg_run({"train", "--config", cfg, "--data", data, "--out", (dir / "run").string()});
  CHECK(unlabeled.code == 1);
  CHECK(unlabeled.err.find("afg label") != std::string::npos);

  REQUIRE(afg_run({"label", "--config", cfg, "--data", data}).code == 0);
  const auto trained =
      afg_run({"train", "--config", cfg, "--data", data, "--out", (dir / "run").string(), "--seed", "4"});
  CHECK(trained.code == 0);
  CHECK(fs::exists(dir / "run" / "model.ckpt"));
  CHECK(fs::exists(dir / "run" / "metrics.jsonl"));
  CHECK(slurp(dir / "run" / "run.json").find("\"seed\": 4") != std::string::npos);

  const auto ev = afg_run({"eval", "--config", cfg, "--data", data, "--ckpt",
                           (dir / "run" / "model.ckpt").string(), "--mode", "silver", "--out",
                           (dir / "eval").string()});
  CHECK(ev.code == 0);
  CHECK(fs::exists(dir / "eval" / "report.json"));
  const auto rep = afg_run({"report", (dir / "eval" / "report.json").string()});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("silver") != std::string::npos);
}

TEST_CASE("synth is reproducible from the seed") {
  const auto dir = fresh_dir("repro");
  const auto cfg = small_config(dir).string();
  REQUIRE(afg_run({"synth", "--config", cfg, "--seed", "7", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(afg_run({"synth", "--config", cfg, "--seed", "7", "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "corpus.jsonl", "config.json"}) {
    CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }
}

TEST_CASE("missing inputs are reported, runtime failures exit with 2") {
  const auto dir = fresh_dir("missing");
  CHECK(afg_run({"pseudo", "--data", (dir / "nothing").string()}).code == 1);
  std::ofstream(dir / "train.jsonl") << "not json\n";
  CHECK(afg_run({"label", "--data", dir.string()}).code == 1);
  std::ofstream(dir / "fake.ckpt") << "garbage";
  fs::create_directories(dir / "ok");
  const auto r = afg_run({"eval", "--data", (dir / "ok").string(), "--ckpt", (dir / "fake.ckpt").string(),
                          "--out", (dir / "e").string()});
  CHECK(r.code == 1);
}
