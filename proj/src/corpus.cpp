#include "afg/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "afg/error.hpp"
#include "afg/eval.hpp"
#include "json.hpp"

namespace afg::corpus {
namespace {

using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

ordered_json passage_to_json(const Passage& p) {
  ordered_json j;
  j["pid"] = p.pid;
  j["title"] = p.title;
  j["text"] = p.text;
  j["rank"] = p.rank;
  j["score"] = p.score;
  return j;
}

ordered_json example_to_json(const Example& ex) {
  ordered_json j;
  j["id"] = ex.id;
  j["task_kind"] = to_string(ex.task_kind);
  j["query"] = ex.query;
  j["gold_answers"] = ex.gold_answers;
  j["passages"] = ordered_json::array();
  for (const auto& p : ex.passages) j["passages"].push_back(passage_to_json(p));
  if (ex.pseudo) {
    ordered_json s;
    s["text"] = ex.pseudo->text;
    s["prompt_kind"] = to_string(ex.pseudo->prompt_kind);
    s["source"] = to_string(ex.pseudo->source);
    j["pseudo"] = std::move(s);
  } else {
    j["pseudo"] = nullptr;
  }
  if (ex.silver) {
    ordered_json s;
    s["passage_labels"] = ex.silver->passage_labels;
    s["pseudo_label"] = ex.silver->pseudo_label;
    s["method"] = to_string(ex.silver->method);
    s["scores"] = ex.silver->scores;
    s["pseudo_score"] = ex.silver->pseudo_score;
    j["silver"] = std::move(s);
  } else {
    j["silver"] = nullptr;
  }
  return j;
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw DataError(std::string("missing field '") + name + "'");
  return *it;
}

template <typename T>
T typed(const json& j, const char* name) {
  try {
    return field(j, name).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + name + "' has the wrong type");
  }
}

Passage passage_from_json(const json& j) {
  Passage p;
  p.pid = typed<std::string>(j, "pid");
  p.title = typed<std::string>(j, "title");
  p.text = typed<std::string>(j, "text");
  p.rank = typed<int>(j, "rank");
  p.score = typed<double>(j, "score");
  return p;
}

Example example_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  Example ex;
  ex.id = typed<std::string>(j, "id");
  ex.task_kind = parse_task_kind(typed<std::string>(j, "task_kind"));
  ex.query = typed<std::string>(j, "query");
  ex.gold_answers = typed<std::vector<std::string>>(j, "gold_answers");
  const json& passages = field(j, "passages");
  if (!passages.is_array()) throw DataError("field 'passages' must be an array");
  for (const auto& p : passages) ex.passages.push_back(passage_from_json(p));

  if (auto it = j.find("pseudo"); it != j.end() && !it->is_null()) {
    PseudoAnswer s;
    s.text = typed<std::string>(*it, "text");
    s.prompt_kind = parse_prompt_kind(typed<std::string>(*it, "prompt_kind"));
    s.source = parse_pseudo_source(typed<std::string>(*it, "source"));
    ex.pseudo = std::move(s);
  }
  if (auto it = j.find("silver"); it != j.end() && !it->is_null()) {
    SilverLabels s;
    s.passage_labels = typed<std::vector<int>>(*it, "passage_labels");
    s.pseudo_label = typed<int>(*it, "pseudo_label");
    s.method = parse_label_method(typed<std::string>(*it, "method"));
    s.scores = typed<std::vector<double>>(*it, "scores");
    s.pseudo_score = typed<double>(*it, "pseudo_score");
    ex.silver = std::move(s);
  }
  return ex;
}

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed JSON: " + e.what());
    }
    try {
      fn(j);
    } catch (const Error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void write_lines(const std::vector<ordered_json>& records, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

// Word pools for the synthetic world. Values are disjoint across attributes.
struct AttributePool {
  std::string_view name;
  std::array<std::string_view, 10> values;
};

constexpr std::array<AttributePool, 8> kPools{{
    {"color", {"crimson", "azure", "violet", "amber", "ivory", "scarlet", "teal", "maroon", "silver", "indigo"}},
    {"city", {"paris", "lima", "oslo", "cairo", "quito", "dublin", "madrid", "vienna", "tokyo", "delhi"}},
    {"food", {"bread", "rice", "cheese", "noodles", "soup", "honey", "olives", "figs", "beans", "yogurt"}},
    {"animal", {"falcon", "otter", "badger", "heron", "lynx", "tortoise", "walrus", "weasel", "bison", "gecko"}},
    {"metal", {"copper", "zinc", "cobalt", "nickel", "tin", "iron", "gold", "lead", "chrome", "bronze"}},
    {"sport", {"tennis", "rugby", "hockey", "cricket", "polo", "judo", "rowing", "fencing", "archery", "karate"}},
    {"tree", {"oak", "maple", "cedar", "birch", "willow", "pine", "elm", "aspen", "spruce", "walnut"}},
    {"gem", {"ruby", "opal", "jade", "topaz", "garnet", "pearl", "onyx", "quartz", "beryl", "agate"}},
}};

constexpr std::array<std::string_view, 12> kOnsets{"b", "d", "f", "g", "k", "m", "n", "p", "r", "s", "v", "z"};
constexpr std::array<std::string_view, 5> kNuclei{"a", "e", "i", "o", "u"};

// Template words of question()/statement().
constexpr std::array<std::string_view, 6> kTemplateWords{"what", "is", "the", "of", ".", "?"};

std::vector<std::string> nonce_names(int n, std::mt19937_64& rng,
                                     const std::set<std::string>& reserved) {
  std::set<std::string> seen;
  std::vector<std::string> names;
  std::uniform_int_distribution<std::size_t> onset(0, kOnsets.size() - 1);
  std::uniform_int_distribution<std::size_t> nucleus(0, kNuclei.size() - 1);
  while (static_cast<int>(names.size()) < n) {
    std::string name;
    for (int s = 0; s < 3; ++s) {
      name += kOnsets[onset(rng)];
      name += kNuclei[nucleus(rng)];
    }
    bool clashes = reserved.count(name) > 0 || seen.count(name) > 0;
    for (const auto& r : reserved) {
      if (name.find(r) != std::string::npos) clashes = true;
    }
    if (clashes) continue;
    seen.insert(name);
    names.push_back(std::move(name));
  }
  return names;
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string format_id(std::string_view split, int i) {
  std::ostringstream os;
  os << split << "-";
  os.width(5);
  os.fill('0');
  os << i;
  return os.str();
}

}  // namespace

void save_dataset(const Split& split, const std::filesystem::path& path) {
  std::vector<ordered_json> records;
  records.reserve(split.size());
  for (const auto& ex : split) records.push_back(example_to_json(ex));
  write_lines(records, path);
}

Split load_dataset(const std::filesystem::path& path) {
  Split split;
  for_each_jsonl(path, [&](const json& j) {
    Example ex = example_from_json(j);
    validate(ex);
    split.push_back(std::move(ex));
  });
  return split;
}

void save_passages(const std::vector<Passage>& passages, const std::filesystem::path& path) {
  std::vector<ordered_json> records;
  for (const auto& p : passages) {
    ordered_json j;
    j["pid"] = p.pid;
    j["title"] = p.title;
    j["text"] = p.text;
    records.push_back(std::move(j));
  }
  write_lines(records, path);
}

std::vector<Passage> load_passages(const std::filesystem::path& path) {
  std::vector<Passage> out;
  for_each_jsonl(path, [&](const json& j) {
    Passage p;
    p.pid = typed<std::string>(j, "pid");
    p.title = typed<std::string>(j, "title");
    p.text = typed<std::string>(j, "text");
    if (p.text.empty()) throw DataError("passage '" + p.pid + "': field 'text' is empty");
    out.push_back(std::move(p));
  });
  return out;
}

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("synth: " + what);
  };
  require(n_entities >= 4, "n_entities must be >= 4");
  require(n_attributes >= 1 && n_attributes <= static_cast<int>(kPools.size()),
          "n_attributes must be in [1, " + std::to_string(kPools.size()) + "]");
  require(values_per_attribute >= 2 &&
              values_per_attribute <= static_cast<int>(kPools[0].values.size()),
          "values_per_attribute must be in [2, " + std::to_string(kPools[0].values.size()) + "]");
  require(n_train >= 1 && n_dev >= 1 && n_test >= 1, "every split needs >= 1 example");
  require(k >= 1, "k must be >= 1");
  require(k <= n_entities, "k must not exceed n_entities");
  require(distractor_rate >= 0.0 && distractor_rate <= 1.0, "distractor_rate must be in [0,1]");
  require(fact_fraction >= 0.0 && fact_fraction <= 1.0, "fact_fraction must be in [0,1]");
  require(max_extra_sentences >= 0 && max_extra_sentences <= 5,
          "max_extra_sentences must be in [0,5]");
  require(heldout_fraction >= 0.0 && heldout_fraction < 1.0, "heldout_fraction must be in [0,1)");
  require(vocab_cap >= 1, "vocab_cap must be >= 1");
}

const std::string& SyntheticWorld::value_of(int entity, int attribute) const {
  return values[attribute][facts[entity][attribute]];
}

const Passage& SyntheticWorld::passage_of(int entity, int attribute) const {
  return passages[static_cast<std::size_t>(entity) * attributes.size() + attribute];
}

std::optional<int> SyntheticWorld::attribute_of_value(std::string_view value) const {
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (std::find(values[a].begin(), values[a].end(), value) != values[a].end()) {
      return static_cast<int>(a);
    }
  }
  return std::nullopt;
}

std::string SyntheticWorld::question(std::string_view attribute, std::string_view entity) {
  return "what is the " + std::string(attribute) + " of " + std::string(entity) + "?";
}

std::string SyntheticWorld::statement(std::string_view attribute, std::string_view entity,
                                      std::string_view value) {
  return "the " + std::string(attribute) + " of " + std::string(entity) + " is " +
         std::string(value) + ".";
}

SyntheticWorld build_world(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  SyntheticWorld world;
  world.seed = seed;
  std::mt19937_64 rng(split_seed(seed, 0));

  std::set<std::string> reserved(kTemplateWords.begin(), kTemplateWords.end());
  for (int a = 0; a < config.n_attributes; ++a) {
    const auto& pool = kPools[a];
    world.attributes.emplace_back(pool.name);
    reserved.emplace(pool.name);
    std::vector<std::string> vals(pool.values.begin(), pool.values.end());
    std::shuffle(vals.begin(), vals.end(), rng);
    vals.resize(config.values_per_attribute);
    std::sort(vals.begin(), vals.end());
    for (const auto& v : vals) reserved.insert(v);
    world.values.push_back(std::move(vals));
  }
  world.entities = nonce_names(config.n_entities, rng, reserved);

  std::uniform_int_distribution<int> pick_value(0, config.values_per_attribute - 1);
  world.facts.assign(config.n_entities, std::vector<int>(config.n_attributes));
  for (auto& row : world.facts) {
    for (auto& v : row) v = pick_value(rng);
  }

  const int max_extra = std::min(config.max_extra_sentences, config.n_attributes - 1);
  std::uniform_int_distribution<int> pick_extra(0, max_extra);
  for (int e = 0; e < config.n_entities; ++e) {
    for (int a = 0; a < config.n_attributes; ++a) {
      std::vector<int> others;
      for (int b = 0; b < config.n_attributes; ++b) {
        if (b != a) others.push_back(b);
      }
      std::shuffle(others.begin(), others.end(), rng);
      others.resize(pick_extra(rng));
      std::string text = SyntheticWorld::statement(world.attributes[a], world.entities[e],
                                                   world.value_of(e, a));
      for (int b : others) {
        text += " " + SyntheticWorld::statement(world.attributes[b], world.entities[e],
                                                world.value_of(e, b));
      }
      Passage p;
      p.pid = world.entities[e] + "-" + world.attributes[a];
      p.title = world.entities[e];
      p.text = std::move(text);
      world.passages.push_back(std::move(p));
    }
  }

  const std::size_t vocab = surface_vocabulary_size(world);
  if (vocab > static_cast<std::size_t>(config.vocab_cap)) {
    throw ConfigError("synth: world needs " + std::to_string(vocab) +
                      " surface forms, more than vocab_cap=" + std::to_string(config.vocab_cap));
  }
  return world;
}

std::size_t surface_vocabulary_size(const SyntheticWorld& world) {
  std::set<std::string> forms(kTemplateWords.begin(), kTemplateWords.end());
  forms.insert(std::string(kSupports));
  forms.insert(std::string(kRefutes));
  forms.insert(world.entities.begin(), world.entities.end());
  forms.insert(world.attributes.begin(), world.attributes.end());
  for (const auto& vals : world.values) forms.insert(vals.begin(), vals.end());
  return forms.size();
}

SynthSplits synth_generate(const SynthConfig& config, std::uint64_t seed) {
  const SyntheticWorld world = build_world(config, seed);
  const int n_attr = config.n_attributes;

  std::vector<Fact> all_facts;
  for (int e = 0; e < config.n_entities; ++e) {
    for (int a = 0; a < n_attr; ++a) all_facts.push_back({e, a});
  }
  std::mt19937_64 fact_rng(split_seed(seed, 1));
  std::shuffle(all_facts.begin(), all_facts.end(), fact_rng);
  const auto n_heldout = static_cast<std::size_t>(config.heldout_fraction *
                                                  static_cast<double>(all_facts.size()));
  std::vector<Fact> train_facts(all_facts.begin() + static_cast<std::ptrdiff_t>(n_heldout),
                                all_facts.end());
  std::vector<Fact> eval_facts(all_facts.begin(),
                               all_facts.begin() + static_cast<std::ptrdiff_t>(n_heldout));
  if (eval_facts.empty()) eval_facts = train_facts;

  auto make_split = [&](std::string_view name, int n, const std::vector<Fact>& facts,
                        std::uint64_t salt) {
    std::mt19937_64 rng(split_seed(seed, salt));
    std::uniform_int_distribution<std::size_t> pick_fact(0, facts.size() - 1);
    std::bernoulli_distribution is_fact(config.fact_fraction);
    std::bernoulli_distribution keep_gold(1.0 - config.distractor_rate);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> pick_entity(0, config.n_entities - 1);

    Split split;
    for (int i = 0; i < n; ++i) {
      const Fact fact = facts[pick_fact(rng)];
      const std::string& entity = world.entities[fact.entity];
      const std::string& attribute = world.attributes[fact.attribute];
      const std::string& value = world.value_of(fact.entity, fact.attribute);

      Example ex;
      ex.id = format_id(name, i);
      if (is_fact(rng)) {
        ex.task_kind = TaskKind::kFact;
        std::string stated = value;
        const bool truthful = coin(rng);
        if (!truthful) {
          const auto& pool = world.values[fact.attribute];
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          while (stated == value) stated = pool[pick(rng)];
        }
        ex.query = SyntheticWorld::statement(attribute, entity, stated);
        ex.gold_answers = {std::string(truthful ? kSupports : kRefutes)};
      } else {
        ex.task_kind = TaskKind::kQa;
        ex.query = SyntheticWorld::question(attribute, entity);
        ex.gold_answers = {value};
      }

      std::vector<Passage> candidates;
      if (keep_gold(rng)) candidates.push_back(world.passage_of(fact.entity, fact.attribute));
      const std::vector<std::string> value_probe{value};
      std::vector<int> others;
      for (int e = 0; e < config.n_entities; ++e) {
        if (e != fact.entity) others.push_back(e);
      }
      std::shuffle(others.begin(), others.end(), rng);
      for (int e : others) {
        if (static_cast<int>(candidates.size()) == config.k) break;
        const Passage& p = world.passage_of(e, fact.attribute);
        if (eval::contains_any(p.text, value_probe)) continue;
        candidates.push_back(p);
      }
      if (static_cast<int>(candidates.size()) < config.k) {
        throw ConfigError("synth: not enough distractor entities for k=" +
                          std::to_string(config.k) + "; raise n_entities or values_per_attribute");
      }
      ex.passages = retrieve_topk(ex.query, candidates, config.k);
      split.push_back(std::move(ex));
    }
    return split;
  };

  SynthSplits out;
  out.train = make_split("train", config.n_train, train_facts, 2);
  out.dev = make_split("dev", config.n_dev, eval_facts, 3);
  out.test = make_split("test", config.n_test, eval_facts, 4);
  return out;
}

int overlap_score(std::string_view query, std::string_view text) {
  const auto q = eval::normalized_tokens(query);
  const auto t = eval::normalized_tokens(text);
  const std::set<std::string> qs(q.begin(), q.end());
  const std::set<std::string> ts(t.begin(), t.end());
  int shared = 0;
  for (const auto& w : qs) shared += ts.count(w) ? 1 : 0;
  return shared;
}

std::vector<Passage> retrieve_topk(std::string_view query, const std::vector<Passage>& corpus,
                                   int k) {
  if (k < 1) throw ConfigError("retrieve_topk: k must be >= 1");
  if (corpus.empty()) throw DataError("retrieve_topk: corpus is empty");
  std::vector<std::pair<int, std::size_t>> scored;
  scored.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    scored.emplace_back(overlap_score(query, corpus[i].text), i);
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), corpus.size());
  auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return corpus[a.second].pid < corpus[b.second].pid;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), better);
  std::vector<Passage> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    Passage p = corpus[scored[r].second];
    p.rank = static_cast<int>(r) + 1;
    p.score = scored[r].first;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace afg::corpus
