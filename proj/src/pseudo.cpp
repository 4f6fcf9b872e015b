#include "afg/pseudo.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "afg/error.hpp"
#include "afg/eval.hpp"
#include "json.hpp"
#include "prompt_templates.hpp"

namespace afg::pseudo {
namespace {

void replace_all(std::string& s, std::string_view key, std::string_view value) {
  for (std::size_t pos = s.find(key); pos != std::string::npos;
       pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// The entity a synthetic query or claim talks about: the longest world
// entity appearing as a whole token.
int find_entity(const corpus::SyntheticWorld& world, std::string_view text) {
  const auto toks = eval::normalized_tokens(text);
  int best = -1;
  for (std::size_t e = 0; e < world.entities.size(); ++e) {
    if (std::find(toks.begin(), toks.end(), world.entities[e]) == toks.end()) continue;
    if (best < 0 || world.entities[e].size() > world.entities[best].size()) best = static_cast<int>(e);
  }
  return best;
}

int find_attribute(const corpus::SyntheticWorld& world, std::string_view text) {
  const auto toks = eval::normalized_tokens(text);
  for (std::size_t a = 0; a < world.attributes.size(); ++a) {
    if (std::find(toks.begin(), toks.end(), world.attributes[a]) != toks.end()) {
      return static_cast<int>(a);
    }
  }
  return -1;
}

std::string other_value(const corpus::SyntheticWorld& world, int attribute,
                        std::string_view avoid, std::mt19937_64& rng) {
  std::vector<std::string> pool;
  const std::string norm_avoid = eval::normalize_answer(avoid);
  for (const auto& v : world.values[attribute]) {
    if (eval::normalize_answer(v).find(norm_avoid) == std::string::npos) pool.push_back(v);
  }
  if (pool.empty()) throw DataError("simulate_pseudo: no wrong value available");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

[[noreturn]] void not_synthetic(const Example& ex) {
  throw DataError("example '" + ex.id +
                  "' does not come from the synthetic world; supply pseudo-answers with "
                  "import_pseudo (`afg pseudo --import FILE`)");
}

}  // namespace

std::string render_prompt(PromptKind kind, std::string_view query) {
  std::string out;
  switch (kind) {
    case PromptKind::kConcise: out = templates::kConcise; break;
    case PromptKind::kSpeculative: out = templates::kSpeculative; break;
    case PromptKind::kReasoned: out = templates::kReasoned; break;
  }
  replace_all(out, "{query}", query);
  return out;
}

void SimulatorConfig::validate() const {
  for (double p : p_correct) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("pseudo: p_correct values must be in [0,1]");
  }
  double total = 0.0;
  for (double w : kind_weights) {
    if (!(w >= 0.0)) throw ConfigError("pseudo: kind_weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("pseudo: kind_weights must not all be zero");
  if (hedge_template.find("{answer}") == std::string::npos ||
      rationale_template.find("{answer}") == std::string::npos) {
    throw ConfigError("pseudo: templates must contain {answer}");
  }
}

PseudoAnswer simulate_pseudo(const Example& example, PromptKind kind,
                             const SimulatorConfig& config, const corpus::SyntheticWorld* world,
                             std::mt19937_64& rng) {
  if (world == nullptr) not_synthetic(example);
  const int entity = find_entity(*world, example.query);
  const int attribute = find_attribute(*world, example.query);
  if (entity < 0 || attribute < 0) not_synthetic(example);
  const std::string& truth = world->value_of(entity, attribute);

  std::bernoulli_distribution coin(config.p_correct[static_cast<int>(kind)]);
  const bool correct = coin(rng);

  std::string answer;
  std::string value;  // the value quoted by a reasoned derivation
  if (example.task_kind == TaskKind::kFact) {
    const std::string& gold = example.gold_answers.front();
    answer = correct ? gold : std::string(gold == kSupports ? kRefutes : kSupports);
    value = correct ? truth : other_value(*world, attribute, truth, rng);
  } else {
    if (!world->attribute_of_value(example.gold_answers.front())) not_synthetic(example);
    answer = correct ? example.gold_answers.front()
                     : other_value(*world, attribute, example.gold_answers.front(), rng);
    value = answer;
  }

  PseudoAnswer out;
  out.prompt_kind = kind;
  out.source = PseudoSource::kSimulator;
  switch (kind) {
    case PromptKind::kConcise: out.text = answer; break;
    case PromptKind::kSpeculative:
      out.text = config.hedge_template;
      replace_all(out.text, "{answer}", answer);
      break;
    case PromptKind::kReasoned:
      out.text = config.rationale_template;
      replace_all(out.text, "{answer}", answer);
      replace_all(out.text, "{attribute}", world->attributes[attribute]);
      replace_all(out.text, "{entity}", world->entities[entity]);
      replace_all(out.text, "{value}", value);
      break;
  }
  return out;
}

void simulate_split(Split& split, const SimulatorConfig& config,
                    const corpus::SyntheticWorld& world, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> kinds(config.kind_weights.begin(), config.kind_weights.end());
  for (auto& ex : split) {
    const auto kind = static_cast<PromptKind>(kinds(rng));
    ex.pseudo = simulate_pseudo(ex, kind, config, &world, rng);
  }
}

std::vector<std::string> import_pseudo(const std::filesystem::path& path, Split& split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < split.size(); ++i) index[split[i].id] = i;

  std::vector<std::string> warnings;
  std::map<std::string, int> seen;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    nlohmann::json rec;
    std::string id;
    std::string text;
    PromptKind kind{};
    try {
      rec = nlohmann::json::parse(line);
      id = rec.at("id").get<std::string>();
      text = rec.at("text").get<std::string>();
      kind = parse_prompt_kind(rec.at("prompt_kind").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + e.what());
    } catch (const Error& e) {
      throw DataError(where + e.what());
    }
    auto it = index.find(id);
    if (it == index.end()) throw DataError(where + "unknown example id '" + id + "'");
    if (seen.contains(id)) {
      throw DataError(where + "duplicate id '" + id + "' (first on line " +
                      std::to_string(seen[id]) + ")");
    }
    seen[id] = lineno;

    auto toks = whitespace_tokens(text);
    if (toks.empty()) throw DataError(where + "empty pseudo-answer for '" + id + "'");
    if (toks.size() > static_cast<std::size_t>(kMaxPseudoTokens)) {
      warnings.push_back(where + "pseudo-answer for '" + id + "' truncated from " +
                         std::to_string(toks.size()) + " to " +
                         std::to_string(kMaxPseudoTokens) + " tokens");
      toks.resize(kMaxPseudoTokens);
      text.clear();
      for (const auto& t : toks) text += (text.empty() ? "" : " ") + t;
    }
    split[it->second].pseudo = PseudoAnswer{text, kind, PseudoSource::kImported};
  }
  return warnings;
}

double pseudo_recall(const Split& split) {
  if (split.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : split) {
    if (!ex.pseudo) {
      throw PrerequisiteError("example '" + ex.id + "' has no pseudo-answer; run `pseudo` first");
    }
    hits += eval::contains_any(ex.pseudo->text, ex.gold_answers) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(split.size());
}

}  // namespace afg::pseudo
