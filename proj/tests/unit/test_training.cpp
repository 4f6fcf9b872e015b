#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "afg/corpus.hpp"
#include "afg/diagnostics.hpp"
#include "afg/error.hpp"
#include "afg/labeling.hpp"
#include "afg/pseudo.hpp"
#include "afg/training.hpp"
#include "doctest.h"

using namespace afg;
using namespace afg::train;

namespace {

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.d_model = 16;
  c.d_k = 8;
  c.d_ff = 16;
  c.n_layers_enc = 1;
  c.n_layers_dec = 1;
  return c;
}

model::Model tiny_instance(std::uint64_t seed) {
  const Split split{diagnostics::tiny_example()};
  const std::vector<const Split*> splits{&split};
  return model::Model(tiny_model(), model::Tokenizer::build(model::TokenizerKind::kWord, splits),
                      seed);
}

Split labeled_split(int n, std::uint64_t seed) {
  corpus::SynthConfig cfg;
  cfg.n_train = n;
  cfg.n_dev = 8;
  cfg.n_test = 4;
  const auto world = corpus::build_world(cfg, seed);
  auto split = corpus::synth_generate(cfg, seed).train;
  pseudo::simulate_split(split, pseudo::SimulatorConfig{}, world, seed);
  labeling::label_split(split, labeling::LabelConfig{});
  return split;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("loss_total blends the two losses") {
  CHECK(loss_total(2.0, 1.0, 0.2) == doctest::Approx(1.8));
  CHECK(loss_total(2.5, 7.0, 0.0) == 2.5);
  CHECK(loss_total(2.5, 7.0, 1.0) == 7.0);
}

TEST_CASE("loss_cls is the summed negative log-likelihood of both branches") {
  model::ClsPrediction even;
  even.passage_index = {0};
  even.passage_logits = {{{0.0, 0.0}}};
  even.pseudo_logits = {0.3, 0.3};
  SilverLabels s{{1}, 0, LabelMethod::kStrinc, {1.0}, 0.0};
  CHECK(loss_cls(even, s) == doctest::Approx(2.0 * std::log(2.0)));

  model::ClsPrediction sure;
  sure.passage_index = {0};
  sure.passage_logits = {{{-800.0, 800.0}}};
  sure.pseudo_logits = {800.0, -800.0};
  CHECK(loss_cls(sure, s) == doctest::Approx(0.0));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 2.0);
  model::ClsPrediction p;
  p.passage_index = {2, 0, 1};
  for (int i = 0; i < 3; ++i) p.passage_logits.push_back({d(rng), d(rng)});
  p.pseudo_logits = {d(rng), d(rng)};
  SilverLabels k3{{1, 0, 1}, 1, LabelMethod::kStrinc, {1, 0, 1}, 1};
  auto prob1 = [](std::array<double, 2> l) { return 1.0 / (1.0 + std::exp(l[0] - l[1])); };
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double q = prob1(p.passage_logits[i]);
    const int y = k3.passage_labels[p.passage_index[i]];
    expected += -(y * std::log(q) + (1 - y) * std::log(1 - q));
  }
  expected += -std::log(prob1(p.pseudo_logits));
  CHECK(loss_cls(p, k3) == doctest::Approx(expected).epsilon(1e-12));

  SilverLabels wrong{{1, 0}, 1, LabelMethod::kStrinc, {1, 0}, 1};
  CHECK_THROWS_AS(loss_cls(p, wrong), ShapeError);
}

TEST_CASE("loss_gen equals the negated teacher-forced log-probability") {
  const auto ex = diagnostics::tiny_example();
  const auto m = tiny_instance(2);
  const auto in = model::pack_input(ex, Mode::kE2e, m.tokenizer(), 128);
  CHECK(loss_gen(m, in, "teal") == doctest::Approx(-m.seq_log_prob(in, m.target_tokens("teal"))).epsilon(1e-12));
  CHECK(loss_gen(m, in, "teal") > 0.0);
  CHECK_THROWS_AS(loss_gen(m, in, ""), DataError);
}

TEST_CASE("sigma 0 and 1 cut gradients to the other branch") {
  const auto ex = diagnostics::tiny_example();
  auto m = tiny_instance(6);
  auto grads_for = [&](double sigma) {
    m.params().clear_grads();
    nn::Tape tape;
    const auto loss = build_example_loss(tape, m, ex, Mode::kE2e, sigma);
    CHECK(loss.l_total.item() == loss_total(loss.l_gen.item(), loss.l_cls->item(), sigma));
    tape.backward(loss.l_total, m.params());
  };
  auto all_zero = [&](const std::string& name) {
    for (double g : m.params().at(name).grad.data) {
      if (g != 0.0) return false;
    }
    return true;
  };

  grads_for(0.0);
  for (const auto& [name, p] : m.params()) {
    if (name.starts_with("cls.")) CHECK_MESSAGE(all_zero(name), name);
  }
  CHECK_FALSE(all_zero("enc.0.attn.v.w"));

  grads_for(1.0);
  for (const auto& [name, p] : m.params()) {
    if (name.starts_with("dec.")) CHECK_MESSAGE(all_zero(name), name);
  }
  CHECK_FALSE(all_zero("enc.0.attn.v.w"));
  CHECK_FALSE(all_zero("cls.ffn.fc1.w"));
}

TEST_CASE("E2E training without silver labels names the label stage") {
  auto split = labeled_split(8, 1);
  split[3].silver.reset();
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_WITH_AS(train::train(split, nullptr, tiny_model(), cfg), doctest::Contains("label"),
                       PrerequisiteError);
  cfg.mode = Mode::kFull;
  CHECK_NOTHROW(train::train(split, nullptr, tiny_model(), cfg));
  split[2].pseudo.reset();
  CHECK_THROWS_AS(train::train(split, nullptr, tiny_model(), cfg), PrerequisiteError);
}

TEST_CASE("training is deterministic and logs the loss identity") {
  const auto split = labeled_split(16, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 9;
  const Split dev(split.begin(), split.begin() + 4);
  const auto a = train::train(split, &dev, tiny_model(), cfg);
  const auto b = train::train(split, &dev, tiny_model(), cfg);
  REQUIRE(a.log.size() == 8);
  CHECK(a.steps == 8);
  const auto dir = std::filesystem::temp_directory_path() / "afg_unit";
  std::filesystem::create_directories(dir);
  write_metrics_log(a.log, dir / "a.jsonl");
  write_metrics_log(b.log, dir / "b.jsonl");
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  for (const auto& r : a.log) {
    const double rebuilt = loss_total(r.loss.l_gen, r.loss.l_cls, cfg.sigma);
    CHECK(std::abs(r.loss.l_total - rebuilt) <= 1e-12 * std::max(1.0, std::abs(rebuilt)));
  }
  CHECK(a.log[3].dev_metric.has_value());
  CHECK_FALSE(a.log[2].dev_metric.has_value());
  CHECK(a.final_dev_metric == a.log.back().dev_metric);

  auto c = cfg;
  c.max_steps = 3;
  CHECK(train::train(split, nullptr, tiny_model(), c).steps == 3);
}

TEST_CASE("FULL mode and E2E at sigma 0 train identical generators") {
  const auto split = labeled_split(8, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.sigma = 0.0;
  const auto e2e = train::train(split, nullptr, tiny_model(), cfg);
  cfg.mode = Mode::kFull;
  cfg.sigma = 0.7;
  const auto full = train::train(split, nullptr, tiny_model(), cfg);
  for (const auto& [name, p] : full.model.params()) {
    CHECK_MESSAGE(e2e.model.params().at(name).value == p.value, name);
  }
}

TEST_CASE("LoRA training only moves adapters") {
  const auto split = labeled_split(8, 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.lora = LoraSettings{{"enc.0.attn.q.w", "dec.0.cross.v.w"}, 2, 4.0};
  const auto res = train::train(split, nullptr, tiny_model(), cfg);
  CHECK(res.model.param_count(true) == 2 * 2 * (16 + 16));
  cfg.lora.reset();
  cfg.epochs = 1;
  cfg.max_steps = 0;
  const auto base = train::train(split, nullptr, tiny_model(), cfg);
  // Same init seed: frozen weights stay at their initial values.
  const auto fresh = train::train(split, nullptr, tiny_model(), [] {
    TrainConfig c;
    c.max_steps = 1;
    c.lr = 1e-300;
    return c;
  }());
  CHECK(res.model.params().at("enc.0.attn.q.w").value ==
        fresh.model.params().at("enc.0.attn.q.w").value);
  CHECK_FALSE(base.model.params().at("enc.0.attn.q.w").value ==
              fresh.model.params().at("enc.0.attn.q.w").value);
}

TEST_CASE("train config JSON") {
  TrainConfig c;
  c.lora = LoraSettings{{"x.w"}, 2, 3.0};
  const auto back = train_config_from_json(nlohmann::json(to_json(c)));
  CHECK(back.lora->targets == c.lora->targets);
  CHECK(back.sigma == c.sigma);
  CHECK_THROWS_AS(train_config_from_json({{"sigmaa", 0.1}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json({{"sigma", 1.5}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json({{"precision", "f32"}}), ConfigError);
}

TEST_CASE("sigma sweep plumbing") {
  const auto split = labeled_split(8, 5);
  const Split dev(split.begin(), split.begin() + 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  CHECK(sweep_sigma(split, dev, tiny_model(), cfg, {}, {1, 2}).empty());
  CHECK_THROWS_AS(sweep_sigma(split, dev, tiny_model(), cfg, {0.2}, {1}), ConfigError);

  const auto dir = std::filesystem::temp_directory_path() / "afg_unit_sweep";
  std::filesystem::remove_all(dir);
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto rows = sweep_sigma(split, dev, tiny_model(), cfg, {0.2}, seeds, dir, 2);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].per_seed.size() == 5);
  for (auto s : seeds) {
    CHECK(std::filesystem::exists(dir / sigma_dirname(0.2) / ("seed_" + std::to_string(s)) / "model.ckpt"));
  }
  const auto serial = sweep_sigma(split, dev, tiny_model(), cfg, {0.2}, seeds, std::nullopt, 1);
  CHECK(serial[0].per_seed == rows[0].per_seed);
}
