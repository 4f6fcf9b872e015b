#pragma once

#include <map>
#include <string>

#include "afg/numerics/params.hpp"

namespace afg::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  struct Moments {
    Tensor m;
    Tensor v;
  };

  AdamConfig config;
  long step = 0;
  std::map<std::string, Moments> moments;
};

// One bias-corrected Adam update of every trainable parameter, then clears
// all gradients. Throws ShapeError if a trainable parameter has no gradient.
void adam_step(ParamStore& store, AdamState& state);

}  // namespace afg::nn
