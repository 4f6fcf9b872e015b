#pragma once

// Joint training of the generator and the classification head:
//   L_total = (1 - sigma) L_gen + sigma L_cls
// with L_gen the teacher-forced negative log-likelihood of the gold answer
// and L_cls the summed cross-entropy of every passage and the pseudo-answer
// against their silver labels. Both losses read one shared encoding.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "afg/example.hpp"
#include "afg/model/model.hpp"
#include "json.hpp"

namespace afg::train {

struct LoraSettings {
  std::vector<std::string> targets;
  int rank = 4;
  double alpha = 8.0;
};

struct TrainConfig {
  double sigma = 0.2;
  double lr = 1e-3;
  int batch_size = 8;
  int epochs = 3;
  long max_steps = 0;  // 0: no step cap
  std::uint64_t seed = 0;
  Mode mode = Mode::kE2e;
  std::optional<LoraSettings> lora;
  std::string precision = "f64";  // the only supported mode
  double clip_norm = 1.0;
  bool eval_each_epoch = true;  // dev metric at every epoch end, else only at the end

  void validate() const;  // throws ConfigError
  // FULL trains the generator alone.
  double effective_sigma() const { return mode == Mode::kFull ? 0.0 : sigma; }
};

nlohmann::ordered_json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossBreakdown {
  double l_gen = 0.0;
  double l_cls = 0.0;
  double l_total = 0.0;
};

double loss_total(double l_gen, double l_cls, double sigma);

// Sum of -log p(true class) over the packed passages and the pseudo-answer.
// pred.passage_index maps predictions back to silver.passage_labels.
double loss_cls(const model::ClsPrediction& pred, const SilverLabels& silver);

// -log p(gold answer | input), teacher forced.
double loss_gen(const model::Model& model, const model::FieldedInput& input,
                std::string_view gold);

struct ExampleLoss {
  nn::Var l_gen;
  std::optional<nn::Var> l_cls;  // absent when sigma is effectively 0 in FULL mode
  nn::Var l_total;
};

// Builds the loss graph of one example on `tape`. The classification term
// is present in every mode except FULL and needs silver labels.
ExampleLoss build_example_loss(nn::Tape& tape, const model::Model& model, const Example& example,
                               Mode mode, double sigma);

struct StepRecord {
  long step = 0;
  int epoch = 0;
  LossBreakdown loss;  // batch means
  std::optional<double> dev_metric;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  model::Model model;
  std::vector<StepRecord> log;
  std::optional<double> final_dev_metric;
  long steps = 0;
};

// Called after every optimizer step; returning true stops training.
using StepCallback = std::function<bool(const model::Model&, const StepRecord&)>;

// Trains a fresh model (parameters seeded from config.seed). Without a
// tokenizer one is built over the train and dev texts.
TrainResult train(const Split& train_split, const Split* dev, const model::ModelConfig& model_config,
                  const TrainConfig& config, const model::Tokenizer* tokenizer = nullptr,
                  const StepCallback& on_step = {});

// Continues training an existing model in place.
TrainResult train_model(model::Model model, const Split& train_split, const Split* dev,
                        const TrainConfig& config, const StepCallback& on_step = {});

void write_metrics_log(const std::vector<StepRecord>& log, const std::filesystem::path& path);

// Fraction of silver labels (passages and pseudo-answer) matched by the
// argmax of the classification head.
double cls_accuracy(const model::Model& model, const Split& split, Mode mode);

struct SweepRow {
  double sigma = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over seeds
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed;
};

// One model per (sigma, seed) cell, at most `threads` at a time. With a
// run directory each cell writes {run}/{sigma}/{seed}/model.ckpt and
// metrics.jsonl next to it.
std::vector<SweepRow> sweep_sigma(const Split& train_split, const Split& dev,
                                  const model::ModelConfig& model_config, const TrainConfig& base,
                                  const std::vector<double>& sigmas,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::optional<std::filesystem::path>& run_dir = {},
                                  int threads = 1, const model::Tokenizer* tokenizer = nullptr);

std::string sigma_dirname(double sigma);

}  // namespace afg::train
