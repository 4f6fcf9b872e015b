#pragma once

// Encoder-decoder generator with an auxiliary classification head that
// reads the same encoder states.
//
//   encoder    pre-LN transformer over the packed input, learned positions
//   decoder    pre-LN transformer with causal self-attention and
//              cross-attention over the encoder states
//   cls head   for each passage: alpha_i = softmax(Q p_i^T / sqrt(d)) p_i,
//              mean over query positions, two-layer FFN -> 2 logits; the
//              pseudo-answer branch does the same with S
//
// Linear weights are stored (d_out x d_in) and applied as x W^T + b. LoRA
// adapters add (alpha / r) x A^T B^T to a targeted linear layer.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "afg/model/config.hpp"
#include "afg/model/packing.hpp"
#include "afg/model/tokenizer.hpp"
#include "afg/numerics/params.hpp"
#include "afg/numerics/tape.hpp"

namespace afg::model {

struct ClsPrediction {
  std::vector<double> epsilon;  // P(passage contains answer), per packed passage
  double xi = 0.0;              // P(pseudo-answer contains answer)
  std::vector<int> passage_index;
  std::vector<std::array<double, 2>> passage_logits;
  std::array<double, 2> pseudo_logits{};
};

// Graph handles of one classification pass.
struct ClsGraph {
  std::vector<nn::Var> passage_logits;  // 1 x 2 each
  std::vector<int> passage_index;
  nn::Var pseudo_logits;
};

struct GenerationOutput {
  std::vector<int> tokens;  // includes the final eos when one was produced
  std::vector<double> step_log_probs;
  std::string text;

  double log_prob() const;
};

struct LoraSpec {
  int rank = 0;
  double alpha = 0.0;
  double scaling() const { return alpha / rank; }
};

class Model {
 public:
  // Parameters drawn from a seeded normal distribution. config.vocab_size is
  // taken from the tokenizer unless the tokenizer is empty (synthetic-id
  // models used by gradient checks).
  Model(ModelConfig config, Tokenizer tokenizer, std::uint64_t seed);
  // Wraps existing parameters (checkpoint loading).
  Model(ModelConfig config, Tokenizer tokenizer, nn::ParamStore params,
        std::map<std::string, LoraSpec> adapters);

  const ModelConfig& config() const { return config_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const std::map<std::string, LoraSpec>& adapters() const { return adapters_; }

  // ---- graph builders -----------------------------------------------------
  nn::Var encode(nn::Tape& tape, const FieldedInput& input) const;
  // Logits (T x V) for decoder inputs [pad, prefix...].
  nn::Var decoder_logits(nn::Tape& tape, nn::Var enc, std::span<const int> decoder_input) const;
  // Teacher-forced sum of log p(target_i | target_<i, input); 1 x 1.
  nn::Var seq_log_prob(nn::Tape& tape, nn::Var enc, std::span<const int> target) const;
  ClsGraph cls_forward(nn::Tape& tape, nn::Var enc, const FieldedInput& input) const;

  // ---- inference ------------------------------------------------------------
  nn::Tensor encode(const FieldedInput& input) const;
  std::vector<nn::Tensor> encode_batch(std::span<const FieldedInput> inputs) const;
  // Target must be non-empty and end with eos.
  double seq_log_prob(const FieldedInput& input, std::span<const int> target) const;
  GenerationOutput generate_greedy(const FieldedInput& input, int max_len) const;
  ClsPrediction predict_cls(const FieldedInput& input) const;

  // Answer tokens followed by eos; throws DataError if empty or longer than
  // max_output_len.
  std::vector<int> target_tokens(std::string_view answer) const;

  // ---- LoRA -----------------------------------------------------------------
  // Freezes every base parameter and adds trainable A (r x d_in, small
  // random) and B (d_out x r, zero) for each target linear weight.
  void lora_attach(std::span<const std::string> targets, int rank, double alpha,
                   std::uint64_t seed);
  // W <- W + (alpha / r) B A for every adapter, removes the adapters and
  // marks every parameter trainable again.
  void lora_merge();
  std::vector<std::string> linear_weight_names() const;

  std::size_t param_count(bool trainable_only) const { return params_.count(trainable_only); }

 private:
  nn::Var linear(nn::Tape& tape, nn::Var x, const std::string& prefix) const;
  nn::Var attention(nn::Tape& tape, nn::Var query_in, nn::Var kv_in, const std::string& prefix,
                    bool causal) const;
  nn::Var ffn(nn::Tape& tape, nn::Var x, const std::string& prefix) const;
  nn::Var norm(nn::Tape& tape, nn::Var x, const std::string& prefix) const;
  nn::Var cls_branch(nn::Tape& tape, nn::Var query_states, nn::Var context_states,
                     const std::string& ffn_prefix) const;

  ModelConfig config_;
  Tokenizer tokenizer_;
  nn::ParamStore params_;
  std::map<std::string, LoraSpec> adapters_;  // target weight name -> spec
};

std::string lora_a_name(const std::string& target);
std::string lora_b_name(const std::string& target);

}  // namespace afg::model
