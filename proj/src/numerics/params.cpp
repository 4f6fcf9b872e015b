#include "afg/numerics/params.hpp"

#include <cmath>

#include "afg/error.hpp"

namespace afg::nn {

Parameter& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (params_.count(name)) throw ShapeError("parameter '" + name + "' already exists");
  Parameter p;
  p.value = std::move(value);
  p.trainable = trainable;
  return params_.emplace(name, std::move(p)).first->second;
}

void ParamStore::erase(const std::string& name) {
  if (params_.erase(name) == 0) throw ShapeError("no parameter named '" + name + "'");
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("no parameter named '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("no parameter named '" + name + "'");
  return it->second;
}

void ParamStore::clear_grads() {
  for (auto& [name, p] : params_) p.grad = Tensor();
}

std::size_t ParamStore::count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) {
    if (!trainable_only || p.trainable) n += p.value.size();
  }
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, p] : params_) out.push_back(name);
  return out;
}

double clip_grad_norm(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : store) {
    for (double g : p.grad.data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& [name, p] : store) {
      for (double& g : p.grad.data) g *= factor;
    }
  }
  return norm;
}

}  // namespace afg::nn
