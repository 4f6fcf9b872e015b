#include "afg/model/config.hpp"

#include <set>

#include "afg/error.hpp"

namespace afg::model {

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model: " + what);
  };
  require(vocab_size >= 0, "vocab_size must be >= 0");
  require(d_model >= 1 && d_k >= 1 && d_ff >= 1, "d_model, d_k, d_ff must be >= 1");
  require(n_layers_enc >= 1 && n_layers_dec >= 1, "layer counts must be >= 1");
  require(n_heads >= 1, "n_heads must be >= 1");
  require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
  require(max_input_len >= 1 && max_output_len >= 1, "length caps must be >= 1");
}

std::string_view to_string(TokenizerKind kind) {
  return kind == TokenizerKind::kChar ? "char" : "word";
}

TokenizerKind parse_tokenizer_kind(std::string_view name) {
  if (name == "char") return TokenizerKind::kChar;
  if (name == "word") return TokenizerKind::kWord;
  throw ConfigError("model: unknown tokenizer '" + std::string(name) + "' (expected char|word)");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["tokenizer"] = to_string(c.tokenizer);
  j["vocab_size"] = c.vocab_size;
  j["d_model"] = c.d_model;
  j["d_k"] = c.d_k;
  j["d_ff"] = c.d_ff;
  j["n_layers_enc"] = c.n_layers_enc;
  j["n_layers_dec"] = c.n_layers_dec;
  j["n_heads"] = c.n_heads;
  j["max_input_len"] = c.max_input_len;
  j["max_output_len"] = c.max_output_len;
  j["cls_projections"] = c.cls_projections;
  j["cls_shared_ffn"] = c.cls_shared_ffn;
  j["tie_embeddings"] = c.tie_embeddings;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model: config section must be an object");
  static const std::set<std::string> known{
      "tokenizer",     "vocab_size",     "d_model",         "d_k",
      "d_ff",          "n_layers_enc",   "n_layers_dec",    "n_heads",
      "max_input_len", "max_output_len", "cls_projections", "cls_shared_ffn",
      "tie_embeddings"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("model: unknown key '" + key + "'");
  }
  ModelConfig c;
  try {
    if (j.contains("tokenizer")) c.tokenizer = parse_tokenizer_kind(j.at("tokenizer").get<std::string>());
    auto get_int = [&](const char* key, int& out) {
      if (j.contains(key)) out = j.at(key).get<int>();
    };
    get_int("vocab_size", c.vocab_size);
    get_int("d_model", c.d_model);
    get_int("d_k", c.d_k);
    get_int("d_ff", c.d_ff);
    get_int("n_layers_enc", c.n_layers_enc);
    get_int("n_layers_dec", c.n_layers_dec);
    get_int("n_heads", c.n_heads);
    get_int("max_input_len", c.max_input_len);
    get_int("max_output_len", c.max_output_len);
    if (j.contains("cls_projections")) c.cls_projections = j.at("cls_projections").get<bool>();
    if (j.contains("cls_shared_ffn")) c.cls_shared_ffn = j.at("cls_shared_ffn").get<bool>();
    if (j.contains("tie_embeddings")) c.tie_embeddings = j.at("tie_embeddings").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace afg::model
