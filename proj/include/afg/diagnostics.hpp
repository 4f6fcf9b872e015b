#pragma once

#include <cstdint>

#include "afg/example.hpp"
#include "afg/numerics/gradcheck.hpp"

namespace afg::diagnostics {

// A small labeled example (3 passages, pseudo-answer, silver labels).
Example tiny_example();

struct TinyGradcheck {
  nn::GradcheckReport report;
  int vocab_size = 0;
  std::size_t n_params = 0;
};

// Central-difference check of the E2E total loss on a seeded model with
// d_model=16 and 2+2 layers over tiny_example().
TinyGradcheck gradcheck_tiny(std::uint64_t seed, double sigma = 0.2, double h = 1e-4);

}  // namespace afg::diagnostics
