#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace afg::model {

enum class TokenizerKind { kChar, kWord };

struct ModelConfig {
  TokenizerKind tokenizer = TokenizerKind::kWord;
  int vocab_size = 0;  // fixed by the tokenizer when a model is built from data
  int d_model = 32;
  // Hidden width of the classification FFN. Attention scores of the
  // classification head are scaled by sqrt(d_model), the encoder channel
  // width.
  int d_k = 32;
  int d_ff = 64;
  int n_layers_enc = 2;
  int n_layers_dec = 2;
  int n_heads = 2;
  int max_input_len = 128;
  int max_output_len = 64;
  // Learned Q/K/V projections inside the classification cross-attention.
  bool cls_projections = false;
  // One FFN for the passage and pseudo-answer branches.
  bool cls_shared_ffn = true;
  // Output logits reuse the token embedding (h E^T + b) instead of a
  // separate projection.
  bool tie_embeddings = true;

  void validate() const;  // throws ConfigError
};

std::string_view to_string(TokenizerKind kind);
TokenizerKind parse_tokenizer_kind(std::string_view name);

nlohmann::ordered_json to_json(const ModelConfig& config);
// Keys absent from `j` keep their defaults; unknown keys raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace afg::model
