#include "afg/run_config.hpp"

#include <fstream>

#include "afg/error.hpp"

namespace afg {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

template <typename T>
void read(const json& v, T& out, const std::string& where) {
  try {
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
}

[[noreturn]] void unknown(const std::string& section, const std::string& key) {
  throw ConfigError(section + ": unknown key '" + key + "'");
}

std::array<double, 3> read_per_kind(const json& v, const std::string& where) {
  require_object(v, where);
  std::array<double, 3> out{};
  std::array<bool, 3> seen{};
  for (const auto& [k, x] : v.items()) {
    PromptKind kind{};
    try {
      kind = parse_prompt_kind(k);
    } catch (const Error&) {
      unknown(where, k);
    }
    read(x, out[static_cast<int>(kind)], where + "." + k);
    seen[static_cast<int>(kind)] = true;
  }
  for (int i = 0; i < 3; ++i) {
    if (!seen[i]) {
      throw ConfigError(where + ": missing '" +
                        std::string(to_string(static_cast<PromptKind>(i))) + "'");
    }
  }
  return out;
}

ordered_json per_kind_json(const std::array<double, 3>& v) {
  ordered_json j;
  for (int i = 0; i < 3; ++i) j[std::string(to_string(static_cast<PromptKind>(i)))] = v[i];
  return j;
}

corpus::SynthConfig synth_from_json(const json& j) {
  require_object(j, "synth");
  corpus::SynthConfig c;
  for (const auto& [k, v] : j.items()) {
    const std::string w = "synth." + k;
    if (k == "n_entities") read(v, c.n_entities, w);
    else if (k == "n_attributes") read(v, c.n_attributes, w);
    else if (k == "values_per_attribute") read(v, c.values_per_attribute, w);
    else if (k == "n_train") read(v, c.n_train, w);
    else if (k == "n_dev") read(v, c.n_dev, w);
    else if (k == "n_test") read(v, c.n_test, w);
    else if (k == "k") read(v, c.k, w);
    else if (k == "distractor_rate") read(v, c.distractor_rate, w);
    else if (k == "fact_fraction") read(v, c.fact_fraction, w);
    else if (k == "max_extra_sentences") read(v, c.max_extra_sentences, w);
    else if (k == "heldout_fraction") read(v, c.heldout_fraction, w);
    else if (k == "vocab_cap") read(v, c.vocab_cap, w);
    else unknown("synth", k);
  }
  c.validate();
  return c;
}

labeling::LabelConfig label_from_json(const json& j) {
  require_object(j, "label");
  labeling::LabelConfig c;
  for (const auto& [k, v] : j.items()) {
    const std::string w = "label." + k;
    if (k == "method") {
      std::string name;
      read(v, name, w);
      try {
        c.method = parse_label_method(name);
      } catch (const Error& e) {
        throw ConfigError(w + ": " + e.what());
      }
    } else if (k == "t0") read(v, c.t0, w);
    else if (k == "t_lex") read(v, c.t_lex, w);
    else if (k == "sentence_split") read(v, c.sentence_split, w);
    else unknown("label", k);
  }
  c.validate();
  return c;
}

pseudo::SimulatorConfig pseudo_from_json(const json& j) {
  require_object(j, "pseudo");
  pseudo::SimulatorConfig c;
  for (const auto& [k, v] : j.items()) {
    const std::string w = "pseudo." + k;
    if (k == "p_correct") c.p_correct = read_per_kind(v, w);
    else if (k == "kind_weights") c.kind_weights = read_per_kind(v, w);
    else if (k == "hedge_template") read(v, c.hedge_template, w);
    else if (k == "rationale_template") read(v, c.rationale_template, w);
    else unknown("pseudo", k);
  }
  c.validate();
  return c;
}

SweepConfig sweep_from_json(const json& j) {
  require_object(j, "sweep");
  SweepConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "sigmas") read(v, c.sigmas, "sweep.sigmas");
    else if (k == "seeds") read(v, c.seeds, "sweep.seeds");
    else unknown("sweep", k);
  }
  return c;
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  label.validate();
  model.validate();
  train.validate();
  pseudo.validate();
  for (double s : sweep.sigmas) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("sweep.sigmas: values must be in [0,1]");
  }
}

ordered_json to_json(const corpus::SynthConfig& c) {
  ordered_json j;
  j["n_entities"] = c.n_entities;
  j["n_attributes"] = c.n_attributes;
  j["values_per_attribute"] = c.values_per_attribute;
  j["n_train"] = c.n_train;
  j["n_dev"] = c.n_dev;
  j["n_test"] = c.n_test;
  j["k"] = c.k;
  j["distractor_rate"] = c.distractor_rate;
  j["fact_fraction"] = c.fact_fraction;
  j["max_extra_sentences"] = c.max_extra_sentences;
  j["heldout_fraction"] = c.heldout_fraction;
  j["vocab_cap"] = c.vocab_cap;
  return j;
}

ordered_json to_json(const labeling::LabelConfig& c) {
  ordered_json j;
  j["method"] = std::string(to_string(c.method));
  j["t0"] = c.t0;
  j["t_lex"] = c.t_lex;
  j["sentence_split"] = c.sentence_split;
  return j;
}

ordered_json to_json(const pseudo::SimulatorConfig& c) {
  ordered_json j;
  j["p_correct"] = per_kind_json(c.p_correct);
  j["kind_weights"] = per_kind_json(c.kind_weights);
  j["hedge_template"] = c.hedge_template;
  j["rationale_template"] = c.rationale_template;
  return j;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["synth"] = to_json(c.synth);
  j["label"] = to_json(c.label);
  j["model"] = model::to_json(c.model);
  j["train"] = train::to_json(c.train);
  j["pseudo"] = to_json(c.pseudo);
  j["sweep"] = {{"sigmas", c.sweep.sigmas}, {"seeds", c.sweep.seeds}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  require_object(j, "config");
  RunConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "synth") c.synth = synth_from_json(v);
    else if (k == "label") c.label = label_from_json(v);
    else if (k == "model") c.model = model::model_config_from_json(v);
    else if (k == "train") c.train = train::train_config_from_json(v);
    else if (k == "pseudo") c.pseudo = pseudo_from_json(v);
    else if (k == "sweep") c.sweep = sweep_from_json(v);
    else unknown("config", k);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

}  // namespace afg
