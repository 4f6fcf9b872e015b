#pragma once

#include <functional>
#include <string>
#include <vector>

#include "afg/numerics/params.hpp"
#include "afg/numerics/tape.hpp"

namespace afg::nn {

struct GradcheckGroup {
  std::string name;
  std::size_t n_values = 0;
  // ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-6)
  double rel_err = 0.0;
  double max_abs_diff = 0.0;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::vector<GradcheckGroup> groups;

  // One line per parameter group.
  std::string format() const;
};

// Records a scalar loss on the given tape, reading parameters from the store.
using LossBuilder = std::function<Var(Tape&)>;

// Compares backward() against central differences with step h for every
// element of every trainable parameter.
GradcheckReport gradcheck(ParamStore& store, const LossBuilder& build, double h = 1e-4);

}  // namespace afg::nn
