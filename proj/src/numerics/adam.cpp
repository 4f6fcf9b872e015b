#include "afg/numerics/adam.hpp"

#include <cmath>

#include "afg/error.hpp"

namespace afg::nn {

void adam_step(ParamStore& store, AdamState& state) {
  for (const auto& [name, p] : store) {
    if (p.trainable && p.grad.empty()) {
      throw ShapeError("adam_step: missing gradient for '" + name + "'");
    }
  }
  ++state.step;
  const auto& c = state.config;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));

  for (auto& [name, p] : store) {
    if (!p.trainable) continue;
    auto& mom = state.moments[name];
    if (!mom.m.same_shape(p.value)) {
      mom.m = Tensor::zeros_like(p.value);
      mom.v = Tensor::zeros_like(p.value);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      mom.m.data[i] = c.beta1 * mom.m.data[i] + (1.0 - c.beta1) * g;
      mom.v.data[i] = c.beta2 * mom.v.data[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = mom.m.data[i] / correction1;
      const double v_hat = mom.v.data[i] / correction2;
      p.value.data[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
  store.clear_grads();
}

}  // namespace afg::nn
