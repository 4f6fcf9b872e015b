#include "afg/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "afg/corpus.hpp"
#include "afg/diagnostics.hpp"
#include "afg/error.hpp"
#include "afg/eval.hpp"
#include "afg/evaluate.hpp"
#include "afg/labeling.hpp"
#include "afg/model/checkpoint.hpp"
#include "afg/pseudo.hpp"
#include "afg/run_config.hpp"
#include "afg/training.hpp"

namespace afg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr std::array<std::string_view, 3> kSplitNames{"train", "dev", "test"};

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string data;
  std::string out;
  std::string mode;
  std::optional<int> k;
  std::optional<double> sigma;
  std::string corpus;
  std::string import_path;
  std::string method;
  std::string ckpt;
  std::string split = "dev";
  std::optional<long> max_steps;
  std::vector<double> sigmas;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> reports;
};

RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (o.seed) c.train.seed = *o.seed;
  if (!o.mode.empty()) c.train.mode = parse_mode(o.mode);
  if (o.sigma) c.train.sigma = *o.sigma;
  if (o.k) c.synth.k = *o.k;
  if (o.max_steps) c.train.max_steps = *o.max_steps;
  if (!o.method.empty()) c.label.method = parse_label_method(o.method);
  if (!o.sigmas.empty()) c.sweep.sigmas = o.sigmas;
  if (!o.seeds.empty()) c.sweep.seeds = o.seeds;
  c.validate();
  return c;
}

void write_json(const ordered_json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Resolved config, seed and tool version, so the directory alone reproduces
// its contents.
void stamp_run_dir(const fs::path& dir, const RunConfig& config, std::string_view command,
                   std::uint64_t seed, ordered_json extra = ordered_json::object()) {
  fs::create_directories(dir);
  save_run_config(config, dir / "config.json");
  ordered_json run;
  run["tool_version"] = std::string(kToolVersion);
  run["command"] = std::string(command);
  run["seed"] = seed;
  for (auto& [k, v] : extra.items()) run[k] = v;
  write_json(run, dir / "run.json");
}

struct DataDir {
  std::vector<std::pair<std::string, Split>> splits;

  Split* find(std::string_view name) {
    for (auto& [n, s] : splits) {
      if (n == name) return &s;
    }
    return nullptr;
  }
};

DataDir load_data_dir(const fs::path& dir, bool need_train) {
  if (dir.empty()) throw ConfigError("--data DIR is required");
  DataDir d;
  for (auto name : kSplitNames) {
    const fs::path p = dir / (std::string(name) + ".jsonl");
    if (fs::exists(p)) d.splits.emplace_back(std::string(name), corpus::load_dataset(p));
  }
  if (d.splits.empty()) {
    throw PrerequisiteError("no dataset files in " + dir.string() +
                            "; run `afg synth --out " + dir.string() + "` first");
  }
  if (need_train && !d.find("train")) {
    throw PrerequisiteError(dir.string() + " has no train.jsonl; run `afg synth --out " +
                            dir.string() + "` first");
  }
  return d;
}

void save_data_dir(const DataDir& d, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [name, split] : d.splits) corpus::save_dataset(split, dir / (name + ".jsonl"));
}

// Copies the synthetic-world provenance files so later stages can find them.
void carry_world(const fs::path& from, const fs::path& to) {
  if (fs::equivalent(from, to)) return;
  for (const char* f : {"world.json", "corpus.jsonl"}) {
    if (fs::exists(from / f)) fs::copy_file(from / f, to / f, fs::copy_options::overwrite_existing);
  }
}

model::Tokenizer data_tokenizer(const model::ModelConfig& config, const DataDir& d) {
  std::vector<const Split*> splits;
  for (const auto& [name, s] : d.splits) splits.push_back(&s);
  return model::Tokenizer::build(config.tokenizer, splits);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(4);
  s << v;
  return s.str();
}

int cmd_synth(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  if (o.out.empty()) throw ConfigError("synth: --out DIR is required");
  const std::uint64_t seed = cfg.train.seed;
  const auto splits = corpus::synth_generate(cfg.synth, seed);
  const auto world = corpus::build_world(cfg.synth, seed);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  corpus::save_dataset(splits.train, dir / "train.jsonl");
  corpus::save_dataset(splits.dev, dir / "dev.jsonl");
  corpus::save_dataset(splits.test, dir / "test.jsonl");
  corpus::save_passages(world.passages, dir / "corpus.jsonl");
  write_json({{"synth", to_json(cfg.synth)}, {"seed", seed}}, dir / "world.json");
  stamp_run_dir(dir, cfg, "synth", seed);
  out << "synth: " << splits.train.size() << " train, " << splits.dev.size() << " dev, "
      << splits.test.size() << " test examples, " << world.passages.size()
      << " passages -> " << dir.string() << '\n';
  return 0;
}

int cmd_retrieve(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  DataDir d = load_data_dir(o.data, false);
  std::optional<std::vector<Passage>> corpus_passages;
  if (!o.corpus.empty()) corpus_passages = corpus::load_passages(o.corpus);
  const int k = cfg.synth.k;
  if (k < 1) throw ConfigError("retrieve: --k must be >= 1");
  for (auto& [name, split] : d.splits) {
    double recall = 0.0;
    for (auto& ex : split) {
      ex.passages = corpus::retrieve_topk(ex.query, corpus_passages ? *corpus_passages : ex.passages, k);
      ex.silver.reset();
      validate(ex);
      recall += eval::topk_recall(ex, k);
    }
    out << "retrieve: " << name << " recall@" << k << " = "
        << fmt(split.empty() ? 0.0 : recall / split.size()) << '\n';
  }
  const fs::path dir = o.out.empty() ? fs::path(o.data) : fs::path(o.out);
  save_data_dir(d, dir);
  carry_world(o.data, dir);
  stamp_run_dir(dir, cfg, "retrieve", cfg.train.seed, {{"k", k}});
  return 0;
}

int cmd_pseudo(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(o);
  DataDir d = load_data_dir(o.data, false);
  const fs::path dir = o.out.empty() ? fs::path(o.data) : fs::path(o.out);
  if (!o.import_path.empty()) {
    Split all;
    std::vector<std::size_t> sizes;
    for (auto& [name, s] : d.splits) {
      sizes.push_back(s.size());
      all.insert(all.end(), s.begin(), s.end());
    }
    for (const auto& w : pseudo::import_pseudo(o.import_path, all)) err << "warning: " << w << '\n';
    std::size_t at = 0;
    for (std::size_t i = 0; i < d.splits.size(); ++i) {
      std::copy(all.begin() + at, all.begin() + at + sizes[i], d.splits[i].second.begin());
      at += sizes[i];
    }
  } else {
    const fs::path world_file = fs::path(o.data) / "world.json";
    if (!fs::exists(world_file)) {
      throw PrerequisiteError(o.data + " has no synthetic world (world.json); supply "
                              "pseudo-answers with `afg pseudo --import FILE`");
    }
    const auto wj = read_json(world_file);
    RunConfig world_cfg = run_config_from_json({{"synth", wj.at("synth")}});
    const auto world = corpus::build_world(world_cfg.synth, wj.at("seed").get<std::uint64_t>());
    std::uint64_t salt = 0;
    for (auto& [name, s] : d.splits) {
      pseudo::simulate_split(s, cfg.pseudo, world, cfg.train.seed * 1000003ULL + salt++);
    }
  }
  for (auto& [name, s] : d.splits) {
    bool complete = std::all_of(s.begin(), s.end(), [](const Example& e) { return e.pseudo.has_value(); });
    out << "pseudo: " << name << " recall = "
        << (complete ? fmt(pseudo::pseudo_recall(s)) : std::string("incomplete")) << '\n';
  }
  save_data_dir(d, dir);
  carry_world(o.data, dir);
  stamp_run_dir(dir, cfg, "pseudo", cfg.train.seed);
  return 0;
}

int cmd_label(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  DataDir d = load_data_dir(o.data, false);
  const fs::path dir = o.out.empty() ? fs::path(o.data) : fs::path(o.out);
  for (auto& [name, s] : d.splits) {
    for (const auto& ex : s) {
      if (!ex.pseudo) {
        throw PrerequisiteError("example '" + ex.id + "' in " + name +
                                ".jsonl has no pseudo-answer; run `afg pseudo --data " + o.data +
                                " --out " + dir.string() + "` first");
      }
    }
  }
  std::optional<model::Model> lm;
  if (cfg.label.method == LabelMethod::kCxmi) {
    if (o.ckpt.empty()) throw ConfigError("label: method cxmi needs --ckpt MODEL");
    lm = model::load_checkpoint(o.ckpt);
  }
  for (auto& [name, s] : d.splits) {
    labeling::label_split(s, cfg.label, lm ? &*lm : nullptr);
    std::size_t pos = 0;
    std::size_t total = 0;
    for (const auto& ex : s) {
      for (int l : ex.silver->passage_labels) pos += l;
      total += ex.silver->passage_labels.size();
    }
    out << "label: " << name << " " << to_string(cfg.label.method) << " positive passages "
        << pos << "/" << total << '\n';
  }
  save_data_dir(d, dir);
  carry_world(o.data, dir);
  stamp_run_dir(dir, cfg, "label", cfg.train.seed);
  return 0;
}

void require_labels(const DataDir& d, const RunConfig& cfg, const Options& o) {
  const Split* train = const_cast<DataDir&>(d).find("train");
  for (const auto& ex : *train) {
    if (!ex.pseudo) {
      throw PrerequisiteError("example '" + ex.id + "' has no pseudo-answer; run `afg pseudo --data " +
                              o.data + "` first");
    }
    if (cfg.train.mode != Mode::kFull && !ex.silver) {
      throw PrerequisiteError("example '" + ex.id + "' has no silver labels; " +
                              std::string(to_string(cfg.train.mode)) +
                              " training needs labels: run `afg label --data " + o.data + "` first");
    }
  }
}

int cmd_train(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  if (o.out.empty()) throw ConfigError("train: --out DIR is required");
  DataDir d = load_data_dir(o.data, true);
  require_labels(d, cfg, o);
  const auto tok = data_tokenizer(cfg.model, d);
  const Split* dev = d.find("dev");
  auto res = train::train(*d.find("train"), dev, cfg.model, cfg.train, &tok);

  const fs::path dir = o.out;
  stamp_run_dir(dir, cfg, "train", cfg.train.seed);
  ordered_json meta;
  meta["train_config"] = train::to_json(cfg.train);
  meta["steps"] = res.steps;
  if (res.final_dev_metric) meta["dev_metric"] = *res.final_dev_metric;
  model::save_checkpoint(res.model, dir / "model.ckpt", meta);
  train::write_metrics_log(res.log, dir / "metrics.jsonl");
  out << "train: " << res.steps << " steps, mode " << to_string(cfg.train.mode) << ", sigma "
      << fmt(cfg.train.effective_sigma());
  if (res.final_dev_metric) out << ", dev metric " << fmt(*res.final_dev_metric);
  out << " -> " << (dir / "model.ckpt").string() << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  if (o.ckpt.empty()) throw ConfigError("eval: --ckpt MODEL is required");
  if (o.out.empty()) throw ConfigError("eval: --out DIR is required");
  DataDir d = load_data_dir(o.data, false);
  Split* split = d.find(o.split);
  if (!split) throw PrerequisiteError(o.data + " has no " + o.split + ".jsonl");
  const Mode mode = o.mode.empty() ? cfg.train.mode : parse_mode(o.mode);
  for (const auto& ex : *split) {
    if (!ex.pseudo) {
      throw PrerequisiteError("example '" + ex.id + "' has no pseudo-answer; run `afg pseudo --data " +
                              o.data + "` first");
    }
    if (mode == Mode::kSilver && !ex.silver) {
      throw PrerequisiteError("example '" + ex.id +
                              "' has no silver labels; silver evaluation needs `afg label --data " +
                              o.data + "` first");
    }
  }
  const auto m = model::load_checkpoint(o.ckpt);
  const auto report = eval::evaluate(m, *split, mode, o.ckpt);
  const fs::path dir = o.out;
  stamp_run_dir(dir, cfg, "eval", cfg.train.seed, {{"checkpoint", o.ckpt}, {"split", o.split}});
  eval::write_report(report, dir / "report.json", dir / "predictions.jsonl");
  out << eval::render_table({report});
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto g = diagnostics::gradcheck_tiny(cfg.train.seed, cfg.train.sigma);
  out << g.report.format();
  out << "gradcheck: " << g.n_params << " parameters, V=" << g.vocab_size
      << ", max relative error " << g.report.max_rel_err << " (" << g.report.worst_param << ")\n";
  return g.report.max_rel_err < 1e-3 ? 0 : 2;
}

int threads_from_env() {
  const char* v = std::getenv("AFG_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("AFG_THREADS must be a positive integer");
  return static_cast<int>(n);
}

ordered_json sweep_json(const std::vector<train::SweepRow>& rows) {
  ordered_json j = ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"sigma", r.sigma},
                 {"mean", r.mean},
                 {"std", r.stddev},
                 {"seeds", r.seeds},
                 {"per_seed", r.per_seed}});
  }
  return j;
}

std::string sweep_table(const nlohmann::json& rows) {
  std::ostringstream s;
  s << "sigma   mean     std\n";
  s << "---------------------\n";
  for (const auto& r : rows) {
    s << fmt(r.at("sigma").get<double>()).substr(0, 4) << "    " << fmt(r.at("mean").get<double>())
      << "   " << fmt(r.at("std").get<double>()) << '\n';
  }
  return s.str();
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  if (o.out.empty()) throw ConfigError("sweep-sigma: --out DIR is required");
  DataDir d = load_data_dir(o.data, true);
  require_labels(d, cfg, o);
  const Split* dev = d.find("dev");
  if (!dev) throw PrerequisiteError(o.data + " has no dev.jsonl");
  const auto tok = data_tokenizer(cfg.model, d);
  const fs::path dir = o.out;
  stamp_run_dir(dir, cfg, "sweep-sigma", cfg.train.seed);
  const auto rows = train::sweep_sigma(*d.find("train"), *dev, cfg.model, cfg.train,
                                       cfg.sweep.sigmas, cfg.sweep.seeds, dir, threads_from_env(),
                                       &tok);
  const auto j = sweep_json(rows);
  write_json({{"mode", std::string(to_string(cfg.train.mode))}, {"rows", j}}, dir / "sweep.json");
  out << sweep_table(j);
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  if (o.reports.empty()) throw ConfigError("report: give one or more report files");
  std::vector<eval::MetricsReport> reports;
  for (const auto& path : o.reports) {
    const auto j = read_json(path);
    if (j.contains("rows")) {
      out << path << '\n' << sweep_table(j.at("rows"));
    } else {
      reports.push_back(eval::MetricsReport::from_json(j));
    }
  }
  if (!reports.empty()) out << eval::render_table(reports);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pseudo-answer augmented generation with context filtering", "afg"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "run config JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "seed for every random draw of this stage");
  };
  auto data_out = [&](CLI::App* sub, bool data) {
    if (data) sub->add_option("--data", o.data, "input dataset directory")->required();
    sub->add_option("--out", o.out, "output directory");
  };
  auto mode_opt = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "full|e2e|silver")
        ->check(CLI::IsMember({"full", "e2e", "silver"}));
  };

  auto* synth = app.add_subcommand("synth", "generate the synthetic world and splits");
  common(synth);
  data_out(synth, false);
  synth->add_option("--k", o.k, "passages per example");

  auto* retrieve = app.add_subcommand("retrieve", "rank passages by lexical overlap, keep top k");
  common(retrieve);
  data_out(retrieve, true);
  retrieve->add_option("--k", o.k, "passages to keep");
  retrieve->add_option("--corpus", o.corpus, "retrieve from this passage file instead")
      ->check(CLI::ExistingFile);

  auto* pseudo_cmd = app.add_subcommand("pseudo", "attach pseudo-answers");
  common(pseudo_cmd);
  data_out(pseudo_cmd, true);
  pseudo_cmd->add_option("--import", o.import_path, "JSONL of {id, text, prompt_kind}")
      ->check(CLI::ExistingFile);

  auto* label = app.add_subcommand("label", "compute silver labels");
  common(label);
  data_out(label, true);
  label->add_option("--method", o.method, "strinc|lexical|cxmi")
      ->check(CLI::IsMember({"strinc", "lexical", "cxmi"}));
  label->add_option("--ckpt", o.ckpt, "generator checkpoint for cxmi")->check(CLI::ExistingFile);

  auto* train_cmd = app.add_subcommand("train", "train a model");
  common(train_cmd);
  data_out(train_cmd, true);
  mode_opt(train_cmd);
  train_cmd->add_option("--sigma", o.sigma, "classification loss weight");
  train_cmd->add_option("--max-steps", o.max_steps, "optimizer step cap (0: none)");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  common(eval_cmd);
  data_out(eval_cmd, true);
  mode_opt(eval_cmd);
  eval_cmd->add_option("--ckpt", o.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", o.split, "train|dev|test")
      ->check(CLI::IsMember({"train", "dev", "test"}));

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the total loss");
  common(gradcheck);
  gradcheck->add_option("--sigma", o.sigma, "classification loss weight");

  auto* sweep = app.add_subcommand("sweep-sigma", "train one model per (sigma, seed)");
  common(sweep);
  data_out(sweep, true);
  mode_opt(sweep);
  sweep->add_option("--sigmas", o.sigmas, "sigma values")->delimiter(',');
  sweep->add_option("--seeds", o.seeds, "seeds")->delimiter(',');
  sweep->add_option("--max-steps", o.max_steps, "optimizer step cap per cell (0: none)");

  auto* report = app.add_subcommand("report", "render report or sweep files as a table");
  report->add_option("files", o.reports, "report.json or sweep.json files")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(o, out);
    if (*retrieve) return cmd_retrieve(o, out);
    if (*pseudo_cmd) return cmd_pseudo(o, out, err);
    if (*label) return cmd_label(o, out);
    if (*train_cmd) return cmd_train(o, out);
    if (*eval_cmd) return cmd_eval(o, out);
    if (*gradcheck) return cmd_gradcheck(o, out);
    if (*sweep) return cmd_sweep(o, out);
    if (*report) return cmd_report(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const PrerequisiteError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace afg::cli
