#include "afg/model/model.hpp"

#include <cmath>
#include <random>

#include "afg/error.hpp"

namespace afg::model {

using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

std::string layer_prefix(const char* stack, int layer) {
  return std::string(stack) + "." + std::to_string(layer);
}

std::array<double, 2> softmax2(double a, double b) {
  const double m = std::max(a, b);
  const double ea = std::exp(a - m), eb = std::exp(b - m);
  return {ea / (ea + eb), eb / (ea + eb)};
}

}  // namespace

double GenerationOutput::log_prob() const {
  double total = 0.0;
  for (double lp : step_log_probs) total += lp;
  return total;
}

std::string lora_a_name(const std::string& target) { return "lora." + target + ".A"; }
std::string lora_b_name(const std::string& target) { return "lora." + target + ".B"; }

Model::Model(ModelConfig config, Tokenizer tokenizer, std::uint64_t seed)
    : config_(std::move(config)), tokenizer_(std::move(tokenizer)) {
  if (tokenizer_.vocab_size() > Tokenizer::kReserved || config_.vocab_size == 0) {
    config_.vocab_size = tokenizer_.vocab_size();
  }
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto v = static_cast<std::size_t>(config_.vocab_size);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  const auto dk = static_cast<std::size_t>(config_.d_k);

  std::mt19937_64 rng(seed);
  auto normal = [&](const std::string& name, std::vector<std::size_t> shape, double stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& x : t.data) x = dist(rng);
    params_.add(name, std::move(t));
  };
  auto constant = [&](const std::string& name, std::size_t n, double value) {
    params_.add(name, Tensor({1, n}, value));
  };
  auto linear_params = [&](const std::string& prefix, std::size_t out, std::size_t in) {
    normal(prefix + ".w", {out, in}, 1.0 / std::sqrt(static_cast<double>(in)));
    constant(prefix + ".b", out, 0.0);
  };
  auto norm_params = [&](const std::string& prefix) {
    constant(prefix + ".g", d, 1.0);
    constant(prefix + ".b", d, 0.0);
  };

  normal("embed.tok", {v, d}, 1.0 / std::sqrt(static_cast<double>(d)));
  normal("enc.pos", {static_cast<std::size_t>(config_.max_input_len), d}, 0.1);
  normal("dec.pos", {static_cast<std::size_t>(config_.max_output_len), d}, 0.1);
  for (int l = 0; l < config_.n_layers_enc; ++l) {
    const std::string p = layer_prefix("enc", l);
    norm_params(p + ".ln1");
    for (const char* w : {".attn.q", ".attn.k", ".attn.v", ".attn.o"}) linear_params(p + w, d, d);
    norm_params(p + ".ln2");
    linear_params(p + ".ffn.fc1", ff, d);
    linear_params(p + ".ffn.fc2", d, ff);
  }
  norm_params("enc.ln_f");
  for (int l = 0; l < config_.n_layers_dec; ++l) {
    const std::string p = layer_prefix("dec", l);
    norm_params(p + ".ln1");
    for (const char* w : {".self.q", ".self.k", ".self.v", ".self.o"}) linear_params(p + w, d, d);
    norm_params(p + ".ln2");
    for (const char* w : {".cross.q", ".cross.k", ".cross.v", ".cross.o"}) {
      linear_params(p + w, d, d);
    }
    norm_params(p + ".ln3");
    linear_params(p + ".ffn.fc1", ff, d);
    linear_params(p + ".ffn.fc2", d, ff);
  }
  norm_params("dec.ln_f");
  if (config_.tie_embeddings) {
    constant("dec.out.b", v, 0.0);
  } else {
    linear_params("dec.out", v, d);
  }

  if (config_.cls_projections) {
    for (const char* w : {"cls.proj.q", "cls.proj.k", "cls.proj.v"}) linear_params(w, d, d);
  }
  linear_params("cls.ffn.fc1", dk, d);
  linear_params("cls.ffn.fc2", 2, dk);
  if (!config_.cls_shared_ffn) {
    linear_params("cls.ffn_pseudo.fc1", dk, d);
    linear_params("cls.ffn_pseudo.fc2", 2, dk);
  }
}

Model::Model(ModelConfig config, Tokenizer tokenizer, nn::ParamStore params,
             std::map<std::string, LoraSpec> adapters)
    : config_(std::move(config)),
      tokenizer_(std::move(tokenizer)),
      params_(std::move(params)),
      adapters_(std::move(adapters)) {
  config_.validate();
}

// ---- building blocks --------------------------------------------------------

Var Model::linear(Tape& tape, Var x, const std::string& prefix) const {
  const std::string weight = prefix + ".w";
  Var y = add_row(matmul_nt(x, tape.param(params_, weight)), tape.param(params_, prefix + ".b"));
  if (auto it = adapters_.find(weight); it != adapters_.end()) {
    Var down = matmul_nt(x, tape.param(params_, lora_a_name(weight)));
    Var up = matmul_nt(down, tape.param(params_, lora_b_name(weight)));
    y = add(y, scale(up, it->second.scaling()));
  }
  return y;
}

Var Model::norm(Tape& tape, Var x, const std::string& prefix) const {
  return layer_norm(x, tape.param(params_, prefix + ".g"), tape.param(params_, prefix + ".b"));
}

Var Model::ffn(Tape& tape, Var x, const std::string& prefix) const {
  return linear(tape, relu(linear(tape, x, prefix + ".fc1")), prefix + ".fc2");
}

Var Model::attention(Tape& tape, Var query_in, Var kv_in, const std::string& prefix,
                     bool causal) const {
  Var q = linear(tape, query_in, prefix + ".q");
  Var k = linear(tape, kv_in, prefix + ".k");
  Var v = linear(tape, kv_in, prefix + ".v");
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  const auto dh = static_cast<std::size_t>(config_.d_model) / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = heads == 1 ? k : slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = heads == 1 ? v : slice_cols(v, h * dh, (h + 1) * dh);
    Var weights = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), causal);
    outs.push_back(matmul(weights, vh));
  }
  Var merged = heads == 1 ? outs.front() : concat_cols(outs);
  return linear(tape, merged, prefix + ".o");
}

// ---- graph builders -----------------------------------------------------------

Var Model::encode(Tape& tape, const FieldedInput& input) const {
  const std::size_t len = input.ids.size();
  if (len == 0) throw DataError("encode: empty input");
  if (len > static_cast<std::size_t>(config_.max_input_len)) {
    throw DataError("encode: input of " + std::to_string(len) + " tokens exceeds max_input_len=" +
                    std::to_string(config_.max_input_len) + "; pack_input must truncate first");
  }
  for (int id : input.ids) {
    if (id < 0 || id >= config_.vocab_size) {
      throw DataError("encode: token id " + std::to_string(id) + " >= vocab_size");
    }
  }
  Var x = add(embedding_lookup(tape.param(params_, "embed.tok"), input.ids),
              slice_rows(tape.param(params_, "enc.pos"), 0, len));
  for (int l = 0; l < config_.n_layers_enc; ++l) {
    const std::string p = layer_prefix("enc", l);
    Var h = norm(tape, x, p + ".ln1");
    x = add(x, attention(tape, h, h, p + ".attn", false));
    x = add(x, ffn(tape, norm(tape, x, p + ".ln2"), p + ".ffn"));
  }
  return norm(tape, x, "enc.ln_f");
}

Var Model::decoder_logits(Tape& tape, Var enc, std::span<const int> decoder_input) const {
  const std::size_t len = decoder_input.size();
  if (len == 0 || len > static_cast<std::size_t>(config_.max_output_len)) {
    throw DataError("decoder: input length " + std::to_string(len) + " outside [1, " +
                    std::to_string(config_.max_output_len) + "]");
  }
  Var x = add(embedding_lookup(tape.param(params_, "embed.tok"), decoder_input),
              slice_rows(tape.param(params_, "dec.pos"), 0, len));
  for (int l = 0; l < config_.n_layers_dec; ++l) {
    const std::string p = layer_prefix("dec", l);
    Var h = norm(tape, x, p + ".ln1");
    x = add(x, attention(tape, h, h, p + ".self", true));
    x = add(x, attention(tape, norm(tape, x, p + ".ln2"), enc, p + ".cross", false));
    x = add(x, ffn(tape, norm(tape, x, p + ".ln3"), p + ".ffn"));
  }
  Var h = norm(tape, x, "dec.ln_f");
  if (!config_.tie_embeddings) return linear(tape, h, "dec.out");
  return add_row(matmul_nt(h, tape.param(params_, "embed.tok")), tape.param(params_, "dec.out.b"));
}

Var Model::seq_log_prob(Tape& tape, Var enc, std::span<const int> target) const {
  if (target.empty()) throw DataError("seq_log_prob: empty target");
  for (int id : target) {
    if (id < 0 || id >= config_.vocab_size) {
      throw DataError("seq_log_prob: target token " + std::to_string(id) + " >= vocab_size");
    }
  }
  std::vector<int> decoder_input{Tokenizer::kPad};
  decoder_input.insert(decoder_input.end(), target.begin(), target.end() - 1);
  return scale(cross_entropy(decoder_logits(tape, enc, decoder_input), target), -1.0);
}

Var Model::cls_branch(Tape& tape, Var query_states, Var context_states,
                      const std::string& ffn_prefix) const {
  Var q = query_states, k = context_states, v = context_states;
  if (config_.cls_projections) {
    q = linear(tape, query_states, "cls.proj.q");
    k = linear(tape, context_states, "cls.proj.k");
    v = linear(tape, context_states, "cls.proj.v");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.d_model));
  Var weights = softmax_rows(scale(matmul_nt(q, k), inv_sqrt));
  Var pooled = mean_rows(matmul(weights, v));
  return ffn(tape, pooled, ffn_prefix);
}

ClsGraph Model::cls_forward(Tape& tape, Var enc, const FieldedInput& input) const {
  const Span* q = input.query_span();
  const Span* s = input.pseudo_span();
  if (!q) throw DataError("cls_forward: input has no query span");
  if (!s) throw DataError("cls_forward: input has no pseudo-answer span");
  Var query_states = slice_rows(enc, q->begin, q->end);
  ClsGraph out;
  for (const Span* p : input.passage_spans()) {
    out.passage_logits.push_back(
        cls_branch(tape, query_states, slice_rows(enc, p->begin, p->end), "cls.ffn"));
    out.passage_index.push_back(p->passage_index);
  }
  out.pseudo_logits = cls_branch(tape, query_states, slice_rows(enc, s->begin, s->end),
                                 config_.cls_shared_ffn ? "cls.ffn" : "cls.ffn_pseudo");
  return out;
}

// ---- inference ----------------------------------------------------------------

Tensor Model::encode(const FieldedInput& input) const {
  Tape tape(false, false);
  return encode(tape, input).value();
}

std::vector<Tensor> Model::encode_batch(std::span<const FieldedInput> inputs) const {
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(encode(in));
  return out;
}

double Model::seq_log_prob(const FieldedInput& input, std::span<const int> target) const {
  if (target.empty() || target.back() != Tokenizer::kEos) {
    throw DataError("seq_log_prob: target must be non-empty and end with eos");
  }
  Tape tape(false, false);
  return seq_log_prob(tape, encode(tape, input), target).item();
}

GenerationOutput Model::generate_greedy(const FieldedInput& input, int max_len) const {
  if (max_len < 1) throw ConfigError("generate_greedy: max_len must be >= 1");
  max_len = std::min(max_len, config_.max_output_len);
  Tape tape(false, false);
  Var enc = encode(tape, input);
  GenerationOutput out;
  std::vector<int> decoder_input{Tokenizer::kPad};
  for (int step = 0; step < max_len; ++step) {
    const Tensor& logits = decoder_logits(tape, enc, decoder_input).value();
    const std::size_t row = logits.rows() - 1;
    const std::size_t v = logits.cols();
    std::size_t best = 0;
    double mx = logits(row, 0);
    for (std::size_t c = 1; c < v; ++c) {
      if (logits(row, c) > mx) {
        mx = logits(row, c);
        best = c;
      }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < v; ++c) total += std::exp(logits(row, c) - mx);
    out.tokens.push_back(static_cast<int>(best));
    out.step_log_probs.push_back(-std::log(total));
    if (static_cast<int>(best) == Tokenizer::kEos) break;
    decoder_input.push_back(static_cast<int>(best));
  }
  out.text = tokenizer_.decode(out.tokens);
  return out;
}

ClsPrediction Model::predict_cls(const FieldedInput& input) const {
  Tape tape(false, false);
  ClsGraph g = cls_forward(tape, encode(tape, input), input);
  ClsPrediction out;
  out.passage_index = g.passage_index;
  for (const Var& logits : g.passage_logits) {
    const auto& t = logits.value().data;
    out.passage_logits.push_back({t[0], t[1]});
    out.epsilon.push_back(softmax2(t[0], t[1])[1]);
  }
  const auto& t = g.pseudo_logits.value().data;
  out.pseudo_logits = {t[0], t[1]};
  out.xi = softmax2(t[0], t[1])[1];
  return out;
}

std::vector<int> Model::target_tokens(std::string_view answer) const {
  std::vector<int> ids = tokenizer_.encode(answer);
  if (ids.empty()) throw DataError("answer '" + std::string(answer) + "' tokenizes to nothing");
  ids.push_back(Tokenizer::kEos);
  if (ids.size() > static_cast<std::size_t>(config_.max_output_len)) {
    throw DataError("answer '" + std::string(answer) + "' is longer than max_output_len=" +
                    std::to_string(config_.max_output_len));
  }
  return ids;
}

// ---- LoRA -----------------------------------------------------------------------

std::vector<std::string> Model::linear_weight_names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : params_) {
    if (name.starts_with("lora.") || name.size() < 2 || !name.ends_with(".w")) continue;
    out.push_back(name);
  }
  return out;
}

void Model::lora_attach(std::span<const std::string> targets, int rank, double alpha,
                        std::uint64_t seed) {
  if (rank < 1) throw ConfigError("lora: rank must be >= 1");
  const auto linears = linear_weight_names();
  for (const auto& t : targets) {
    if (std::find(linears.begin(), linears.end(), t) == linears.end()) {
      throw ConfigError("lora: '" + t + "' is not a linear weight of this model");
    }
    if (adapters_.count(t)) throw ConfigError("lora: adapter already attached to '" + t + "'");
  }
  for (auto& [name, p] : params_) p.trainable = false;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.02);
  const auto r = static_cast<std::size_t>(rank);
  for (const auto& t : targets) {
    const Tensor& w = params_.at(t).value;
    Tensor a({r, w.cols()});
    for (double& x : a.data) x = dist(rng);
    params_.add(lora_a_name(t), std::move(a));
    params_.add(lora_b_name(t), Tensor({w.rows(), r}));
    adapters_[t] = LoraSpec{rank, alpha};
  }
}

void Model::lora_merge() {
  for (const auto& [target, spec] : adapters_) {
    Tensor& w = params_.at(target).value;
    const Tensor& a = params_.at(lora_a_name(target)).value;
    const Tensor& b = params_.at(lora_b_name(target)).value;
    const std::size_t r = a.rows();
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < r; ++k) acc += b(i, k) * a(k, j);
        w(i, j) += spec.scaling() * acc;
      }
    }
    params_.erase(lora_a_name(target));
    params_.erase(lora_b_name(target));
  }
  adapters_.clear();
  for (auto& [name, p] : params_) p.trainable = true;
}

}  // namespace afg::model
