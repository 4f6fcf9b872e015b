#pragma once

// Dataset persistence (JSONL), the seeded synthetic world that stands in for
// an encyclopedic corpus, and a unigram-overlap top-k retriever.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afg/example.hpp"

namespace afg::corpus {

// One Example per line, fields in schema order. Throws IoError on failure.
void save_dataset(const Split& split, const std::filesystem::path& path);

// Validates every record; rejects the whole file on the first violation with
// a DataError naming the line number (and example id / field for invariant
// violations). Blank lines are skipped.
Split load_dataset(const std::filesystem::path& path);

// Retrieval corpus: one {"pid","title","text"} object per line.
void save_passages(const std::vector<Passage>& passages, const std::filesystem::path& path);
std::vector<Passage> load_passages(const std::filesystem::path& path);

struct SynthConfig {
  int n_entities = 24;
  int n_attributes = 4;
  int values_per_attribute = 6;
  int n_train = 256;
  int n_dev = 128;
  int n_test = 128;
  int k = 5;
  double distractor_rate = 0.3;  // probability the gold passage is left out
  double fact_fraction = 0.0;
  int max_extra_sentences = 1;  // passage = 1 + U{0..max_extra} sentences
  // Fraction of (entity, attribute) facts reserved for dev/test queries, so
  // dev answers cannot be memorized from train. 0 shares all facts.
  double heldout_fraction = 0.3;
  int vocab_cap = 512;

  void validate() const;  // throws ConfigError
};

struct Fact {
  int entity = 0;
  int attribute = 0;
};

// A world of entities with one value per attribute, plus one passage per
// fact. Fully determined by (config, seed).
struct SyntheticWorld {
  std::uint64_t seed = 0;
  std::vector<std::string> entities;
  std::vector<std::string> attributes;
  std::vector<std::vector<std::string>> values;  // values[attribute]
  std::vector<std::vector<int>> facts;           // facts[entity][attribute] -> value index
  std::vector<Passage> passages;                 // passages[entity * n_attr + attribute]

  const std::string& value_of(int entity, int attribute) const;
  const Passage& passage_of(int entity, int attribute) const;
  // Attribute whose value pool holds `value`, if any.
  std::optional<int> attribute_of_value(std::string_view value) const;

  // Surface forms used by the sentence templates.
  static std::string question(std::string_view attribute, std::string_view entity);
  static std::string statement(std::string_view attribute, std::string_view entity,
                               std::string_view value);
};

SyntheticWorld build_world(const SynthConfig& config, std::uint64_t seed);

struct SynthSplits {
  Split train;
  Split dev;
  Split test;
};

// QA and fact examples over build_world(config, seed). Each example carries
// the gold-evidence passage with probability 1 - distractor_rate; the other
// slots hold passages about other entities sharing the queried attribute
// that never contain the answer. Passages are ranked by retrieve_topk.
SynthSplits synth_generate(const SynthConfig& config, std::uint64_t seed);

// Number of distinct surface tokens of a world (entities, attribute names,
// values, template words).
std::size_t surface_vocabulary_size(const SyntheticWorld& world);

// Count of distinct normalized unigrams shared by query and text.
int overlap_score(std::string_view query, std::string_view text);

// Top-k by overlap_score, ties by ascending pid; ranks 1..k, score = overlap.
// Returns every passage, ranked, when k exceeds the corpus size.
std::vector<Passage> retrieve_topk(std::string_view query, const std::vector<Passage>& corpus,
                                   int k);

}  // namespace afg::corpus
