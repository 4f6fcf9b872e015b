#include "afg/diagnostics.hpp"

#include "afg/model/model.hpp"
#include "afg/training.hpp"

namespace afg::diagnostics {

Example tiny_example() {
  Example ex;
  ex.id = "tiny-0";
  ex.task_kind = TaskKind::kQa;
  ex.query = "what is the color of bakori?";
  ex.gold_answers = {"teal"};
  ex.passages = {
      {"bakori-color", "bakori", "the color of bakori is teal.", 1, 3.0},
      {"mivelu-color", "mivelu", "the color of mivelu is amber.", 2, 2.0},
      {"tosani-color", "tosani", "the color of tosani is coral. the city of tosani is lima.", 3, 2.0},
  };
  ex.pseudo = PseudoAnswer{"perhaps teal .", PromptKind::kSpeculative, PseudoSource::kSimulator};
  ex.silver = SilverLabels{{1, 0, 0}, 1, LabelMethod::kStrinc, {1.0, 0.0, 0.0}, 1.0};
  return ex;
}

TinyGradcheck gradcheck_tiny(std::uint64_t seed, double sigma, double h) {
  const Example ex = tiny_example();
  const Split split{ex};
  const std::vector<const Split*> splits{&split};

  model::ModelConfig cfg;
  cfg.d_model = 16;
  cfg.d_k = 16;
  cfg.d_ff = 32;
  cfg.n_heads = 2;
  cfg.n_layers_enc = 2;
  cfg.n_layers_dec = 2;
  model::Model m(cfg, model::Tokenizer::build(cfg.tokenizer, splits), seed);

  TinyGradcheck out;
  out.vocab_size = m.config().vocab_size;
  out.n_params = m.param_count(true);
  out.report = nn::gradcheck(m.params(), [&](nn::Tape& tape) {
    return train::build_example_loss(tape, m, ex, Mode::kE2e, sigma).l_total;
  }, h);
  return out;
}

}  // namespace afg::diagnostics
