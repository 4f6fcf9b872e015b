#pragma once

// Reverse-mode differentiation over a recorded tape of matrix operations.
//
// A Tape owns every intermediate value produced while building one loss.
// Parameters enter as leaves bound by name to a ParamStore; backward() walks
// the tape in reverse creation order and accumulates d(loss)/d(theta) into
// the store's gradient slots. Only trainable parameters receive gradients.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "afg/numerics/params.hpp"
#include "afg/numerics/tensor.hpp"

namespace afg::nn {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  double item() const;  // value of a 1x1 tensor
};

class Tape {
 public:
  // In checked mode every op verifies its output is finite. With
  // grad_enabled=false no backward closures are recorded (inference).
  explicit Tape(bool checked = false, bool grad_enabled = true)
      : checked_(checked), grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to store[name]; the tensor is referenced, not copied, so the
  // store must outlive the tape and stay unmodified while it is in use.
  Var param(const ParamStore& store, const std::string& name);

  // Accumulates scale * d(loss)/d(theta) into store gradients. Every trainable
  // parameter ends with an allocated gradient slot (zeros if unused).
  void backward(Var loss, ParamStore& store, double scale = 1.0);

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  bool checked() const { return checked_; }

  // Used by op implementations.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;
  Var record(Tensor value, std::vector<std::uint32_t> parents, BackwardFn backward);
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  Tensor& grad(std::uint32_t id);

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    BackwardFn backward;
    std::string param_name;
    bool needs_grad = false;
  };
  const Tensor& node_value(const Node& n) const { return n.ref ? *n.ref : n.value; }

  std::vector<Node> nodes_;
  bool checked_;
  bool grad_enabled_;
};

// ---- forward ops --------------------------------------------------------
// Shape mismatches raise ShapeError naming the op and the shapes.

Var matmul(Var a, Var b);     // (m x k)(k x n)
Var matmul_nt(Var a, Var b);  // a * b^T: (m x k)(n x k)^T
Var add(Var a, Var b);        // same shape
Var add_row(Var a, Var row);  // row (1 x n) broadcast over the rows of a
Var scale(Var a, double s);
Var relu(Var a);
// Row-wise softmax stabilized by row-max subtraction. With causal=true entry
// (i, j) for j > i is excluded (probability 0).
Var softmax_rows(Var a, bool causal = false);
Var log_softmax_rows(Var a);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var embedding_lookup(Var table, std::span<const int> ids);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var mean_rows(Var a);  // (m x n) -> (1 x n)
Var sum(Var a);        // -> 1 x 1
// Sum over rows of -log softmax(logits)[row, targets[row]]; 1 x 1.
Var cross_entropy(Var logits, std::span<const int> targets);

}  // namespace afg::nn
