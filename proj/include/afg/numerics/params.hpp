#pragma once

#include <map>
#include <string>
#include <vector>

#include "afg/numerics/tensor.hpp"

namespace afg::nn {

struct Parameter {
  Tensor value;
  Tensor grad;  // empty until a backward pass fills it
  bool trainable = true;
};

// Named parameters in lexicographic order, so every traversal (backward,
// optimizer, checkpoint) is deterministic.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor value, bool trainable = true);
  void erase(const std::string& name);

  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  void set_trainable(const std::string& name, bool trainable) { at(name).trainable = trainable; }
  void clear_grads();

  // Number of scalar parameters.
  std::size_t count(bool trainable_only) const;
  std::vector<std::string> names() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, Parameter> params_;
};

// Scales every gradient so the global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(ParamStore& store, double max_norm);

}  // namespace afg::nn
