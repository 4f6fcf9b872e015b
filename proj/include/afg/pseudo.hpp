#pragma once

// Pseudo-answers: the three prompt templates, a noisy answer simulator over
// the synthetic world, and import of externally generated answers.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "afg/corpus.hpp"
#include "afg/example.hpp"

namespace afg::pseudo {

inline constexpr int kMaxPseudoTokens = 200;

std::string render_prompt(PromptKind kind, std::string_view query);

struct SimulatorConfig {
  // Probability of producing the correct answer, indexed by PromptKind.
  std::array<double, 3> p_correct{0.5, 0.6, 0.7};
  // Relative frequency of each prompt kind when simulating a whole split.
  std::array<double, 3> kind_weights{1.0, 1.0, 1.0};
  // {answer} is substituted.
  std::string hedge_template = "perhaps {answer} .";
  // {answer}, {attribute}, {entity} and {value} are substituted.
  std::string rationale_template = "{answer} . because the {attribute} of {entity} is {value} .";

  void validate() const;  // throws ConfigError
};

// Draws correct/incorrect with p_correct[kind]; an incorrect QA answer is
// another value of the queried attribute, an incorrect verdict is flipped.
// Needs the world the example was generated from.
PseudoAnswer simulate_pseudo(const Example& example, PromptKind kind,
                             const SimulatorConfig& config, const corpus::SyntheticWorld* world,
                             std::mt19937_64& rng);

// One kind per example drawn from kind_weights, then simulate_pseudo.
void simulate_split(Split& split, const SimulatorConfig& config,
                    const corpus::SyntheticWorld& world, std::uint64_t seed);

// Reads {id, text, prompt_kind} lines into the matching examples of `split`
// (source = imported). Unknown or repeated ids are DataErrors; texts longer
// than 200 tokens are truncated and reported in the returned warnings.
std::vector<std::string> import_pseudo(const std::filesystem::path& path, Split& split);

// Fraction of examples whose pseudo-answer contains a gold answer.
double pseudo_recall(const Split& split);

}  // namespace afg::pseudo
