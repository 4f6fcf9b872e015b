#include "afg/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "afg/error.hpp"
#include "afg/evaluate.hpp"
#include "afg/model/checkpoint.hpp"
#include "afg/model/packing.hpp"
#include "afg/numerics/adam.hpp"

namespace afg::train {

using nn::Tape;
using nn::Var;

void TrainConfig::validate() const {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("train: sigma must be in [0,1]");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
  if (precision != "f64") throw ConfigError("train: precision '" + precision + "' unsupported (f64)");
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
  if (lora) {
    if (lora->rank < 1) throw ConfigError("train: lora.rank must be >= 1");
    if (lora->targets.empty()) throw ConfigError("train: lora.targets must not be empty");
  }
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["sigma"] = c.sigma;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["max_steps"] = c.max_steps;
  j["seed"] = c.seed;
  j["mode"] = std::string(to_string(c.mode));
  if (c.lora) {
    j["lora"] = {{"targets", c.lora->targets}, {"rank", c.lora->rank}, {"alpha", c.lora->alpha}};
  } else {
    j["lora"] = nullptr;
  }
  j["precision"] = c.precision;
  j["clip_norm"] = c.clip_norm;
  j["eval_each_epoch"] = c.eval_each_epoch;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (!j.is_object()) throw ConfigError("train: expected an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "sigma") c.sigma = v.get<double>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "max_steps") c.max_steps = v.get<long>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "mode") c.mode = parse_mode(v.get<std::string>());
      else if (key == "precision") c.precision = v.get<std::string>();
      else if (key == "clip_norm") c.clip_norm = v.get<double>();
      else if (key == "eval_each_epoch") c.eval_each_epoch = v.get<bool>();
      else if (key == "lora") {
        if (v.is_null()) continue;
        LoraSettings l;
        for (const auto& [lk, lv] : v.items()) {
          if (lk == "targets") l.targets = lv.get<std::vector<std::string>>();
          else if (lk == "rank") l.rank = lv.get<int>();
          else if (lk == "alpha") l.alpha = lv.get<double>();
          else throw ConfigError("train.lora: unknown key '" + lk + "'");
        }
        c.lora = l;
      } else {
        throw ConfigError("train: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

double loss_total(double l_gen, double l_cls, double sigma) {
  return (1.0 - sigma) * l_gen + sigma * l_cls;
}

double loss_cls(const model::ClsPrediction& pred, const SilverLabels& silver) {
  if (pred.passage_index.size() != pred.passage_logits.size()) {
    throw ShapeError("loss_cls: passage_index and logits differ in length");
  }
  if (pred.passage_index.size() != silver.passage_labels.size()) {
    throw ShapeError("loss_cls: " + std::to_string(pred.passage_index.size()) +
                     " predictions for " + std::to_string(silver.passage_labels.size()) +
                     " silver labels");
  }
  auto nll = [](const std::array<double, 2>& logits, int label) {
    const double m = std::max(logits[0], logits[1]);
    const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
    return lse - logits[label];
  };
  double total = 0.0;
  for (std::size_t i = 0; i < pred.passage_logits.size(); ++i) {
    total += nll(pred.passage_logits[i], silver.passage_labels.at(pred.passage_index[i]));
  }
  return total + nll(pred.pseudo_logits, silver.pseudo_label);
}

double loss_gen(const model::Model& model, const model::FieldedInput& input,
                std::string_view gold) {
  return -model.seq_log_prob(input, model.target_tokens(gold));
}

ExampleLoss build_example_loss(Tape& tape, const model::Model& model, const Example& example,
                               Mode mode, double sigma) {
  const bool with_cls = mode != Mode::kFull;
  if (with_cls && !example.silver) {
    throw PrerequisiteError("example '" + example.id + "' has no silver labels; " +
                            std::string(to_string(mode)) + " training needs `afg label` first");
  }
  if (mode == Mode::kFull) sigma = 0.0;
  const auto input =
      model::pack_input(example, mode, model.tokenizer(), model.config().max_input_len);
  const Var enc = model.encode(tape, input);

  ExampleLoss out;
  const auto target = model.target_tokens(example.gold_answers.front());
  out.l_gen = nn::scale(model.seq_log_prob(tape, enc, target), -1.0);
  if (!with_cls) {
    out.l_total = nn::scale(out.l_gen, 1.0);
    return out;
  }

  const auto cls = model.cls_forward(tape, enc, input);
  std::vector<Var> rows = cls.passage_logits;
  rows.push_back(cls.pseudo_logits);
  std::vector<int> labels;
  for (int idx : cls.passage_index) labels.push_back(example.silver->passage_labels.at(idx));
  labels.push_back(example.silver->pseudo_label);
  out.l_cls = nn::cross_entropy(nn::concat_rows(rows), labels);
  out.l_total = nn::add(nn::scale(out.l_gen, 1.0 - sigma), nn::scale(*out.l_cls, sigma));
  return out;
}

nlohmann::ordered_json StepRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["l_gen"] = loss.l_gen;
  j["l_cls"] = loss.l_cls;
  j["l_total"] = loss.l_total;
  if (dev_metric) j["dev_metric"] = *dev_metric;
  return j;
}

void write_metrics_log(const std::vector<StepRecord>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : log) out << r.to_json().dump() << '\n';
}

double cls_accuracy(const model::Model& model, const Split& split, Mode mode) {
  std::size_t hit = 0;
  std::size_t total = 0;
  for (const auto& ex : split) {
    if (!ex.silver) {
      throw PrerequisiteError("example '" + ex.id + "' has no silver labels; run `label` first");
    }
    const auto input = model::pack_input(ex, mode, model.tokenizer(), model.config().max_input_len);
    const auto pred = model.predict_cls(input);
    for (std::size_t i = 0; i < pred.epsilon.size(); ++i) {
      const int guess = pred.epsilon[i] > 0.5 ? 1 : 0;
      hit += guess == ex.silver->passage_labels.at(pred.passage_index[i]);
      ++total;
    }
    hit += (pred.xi > 0.5 ? 1 : 0) == ex.silver->pseudo_label;
    ++total;
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

constexpr std::uint64_t kInitSalt = 0x1a17;
constexpr std::uint64_t kShuffleSalt = 0x5ef1;
constexpr std::uint64_t kLoraSalt = 0x10ea;

}  // namespace

TrainResult train(const Split& train_split, const Split* dev, const model::ModelConfig& model_config,
                  const TrainConfig& config, const model::Tokenizer* tokenizer,
                  const StepCallback& on_step) {
  config.validate();
  model::Tokenizer tok;
  if (tokenizer) {
    tok = *tokenizer;
  } else {
    std::vector<const Split*> splits{&train_split};
    if (dev) splits.push_back(dev);
    tok = model::Tokenizer::build(model_config.tokenizer, splits);
  }
  model::Model model(model_config, std::move(tok), derive_seed(config.seed, kInitSalt));
  if (config.lora) {
    model.lora_attach(config.lora->targets, config.lora->rank, config.lora->alpha,
                      derive_seed(config.seed, kLoraSalt));
  }
  return train_model(std::move(model), train_split, dev, config, on_step);
}

TrainResult train_model(model::Model model, const Split& train_split, const Split* dev,
                        const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  if (train_split.empty()) throw DataError("train: empty training split");
  for (const auto& ex : train_split) {
    if (!ex.pseudo) {
      throw PrerequisiteError("example '" + ex.id +
                              "' has no pseudo-answer; run `afg pseudo` before training");
    }
    if (config.mode != Mode::kFull && !ex.silver) {
      throw PrerequisiteError("example '" + ex.id + "' has no silver labels; " +
                              std::string(to_string(config.mode)) +
                              " training needs `afg label` first");
    }
  }

  const double sigma = config.effective_sigma();
  nn::AdamState adam;
  adam.config.lr = config.lr;
  std::vector<std::size_t> order(train_split.size());
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  TrainResult result{std::move(model), {}, std::nullopt, 0};
  auto& m = result.model;
  auto dev_metric = [&]() { return eval::evaluate(m, *dev, config.mode).primary; };

  bool stop = false;
  for (int epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(config.seed, kShuffleSalt + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size() && !stop; start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      LossBreakdown sums;
      for (std::size_t b = start; b < end; ++b) {
        const Example& ex = train_split[order[b]];
        Tape tape;
        const auto loss = build_example_loss(tape, m, ex, config.mode, sigma);
        sums.l_gen += loss.l_gen.item();
        sums.l_cls += loss.l_cls ? loss.l_cls->item() : 0.0;
        sums.l_total += loss.l_total.item();
        tape.backward(loss.l_total, m.params(), inv);
      }
      nn::clip_grad_norm(m.params(), config.clip_norm);
      nn::adam_step(m.params(), adam);
      ++result.steps;

      StepRecord rec;
      rec.step = result.steps;
      rec.epoch = epoch;
      rec.loss = {sums.l_gen * inv, sums.l_cls * inv, sums.l_total * inv};
      const bool epoch_end = end == order.size();
      const bool capped = config.max_steps > 0 && result.steps >= config.max_steps;
      const bool last = capped || (epoch_end && epoch + 1 == config.epochs);
      if (dev && ((epoch_end && config.eval_each_epoch) || last)) {
        rec.dev_metric = dev_metric();
        if (last) result.final_dev_metric = rec.dev_metric;
      }
      result.log.push_back(rec);
      if (on_step && on_step(m, rec)) stop = true;
      if (capped) stop = true;
    }
  }
  if (dev && !result.final_dev_metric) result.final_dev_metric = dev_metric();
  return result;
}

std::string sigma_dirname(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sigma_%.2f", sigma);
  return buf;
}

std::vector<SweepRow> sweep_sigma(const Split& train_split, const Split& dev,
                                  const model::ModelConfig& model_config, const TrainConfig& base,
                                  const std::vector<double>& sigmas,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::optional<std::filesystem::path>& run_dir,
                                  int threads, const model::Tokenizer* tokenizer) {
  if (sigmas.empty()) return {};
  if (seeds.size() < 2) throw ConfigError("sweep_sigma: needs at least two seeds");
  for (double s : sigmas) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("sweep_sigma: sigma values must be in [0,1]");
  }
  model::Tokenizer tok;
  if (tokenizer) {
    tok = *tokenizer;
  } else {
    std::vector<const Split*> splits{&train_split, &dev};
    tok = model::Tokenizer::build(model_config.tokenizer, splits);
  }

  const std::size_t n_cells = sigmas.size() * seeds.size();
  std::vector<double> metric(n_cells, 0.0);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&]() {
    for (std::size_t cell = next++; cell < n_cells; cell = next++) {
      try {
        TrainConfig cfg = base;
        cfg.sigma = sigmas[cell / seeds.size()];
        cfg.seed = seeds[cell % seeds.size()];
        auto res = train(train_split, &dev, model_config, cfg, &tok);
        metric[cell] = *res.final_dev_metric;
        if (run_dir) {
          const auto dir = *run_dir / sigma_dirname(cfg.sigma) / ("seed_" + std::to_string(cfg.seed));
          std::filesystem::create_directories(dir);
          nlohmann::ordered_json meta;
          meta["train_config"] = to_json(cfg);
          meta["dev_metric"] = metric[cell];
          model::save_checkpoint(res.model, dir / "model.ckpt", meta);
          write_metrics_log(res.log, dir / "metrics.jsonl");
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n_cells;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(n_cells)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    SweepRow row;
    row.sigma = sigmas[i];
    row.seeds = seeds;
    row.per_seed.assign(metric.begin() + i * seeds.size(), metric.begin() + (i + 1) * seeds.size());
    const double n = static_cast<double>(seeds.size());
    row.mean = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : row.per_seed) ss += (v - row.mean) * (v - row.mean);
    row.stddev = std::sqrt(ss / (n - 1.0));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace afg::train
