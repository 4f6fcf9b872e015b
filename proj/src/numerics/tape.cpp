#include "afg/numerics/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "afg/error.hpp"

namespace afg::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC view(const Tensor& t) {
  return MapC(t.data.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}
Map view(Tensor& t) {
  return Map(t.data.data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}

Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw ShapeError(std::string(op) + ": operands belong to different tapes");
  }
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

double Var::item() const {
  const Tensor& t = value();
  if (t.size() != 1) throw ShapeError("item: tensor " + t.shape_string() + " is not a scalar");
  return t.data[0];
}

const Tensor& Tape::value(Var v) const { return node_value(nodes_[v.id]); }

Tensor& Tape::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros_like(node_value(n));
  return n.grad;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  const Parameter& p = store.at(name);
  Node n;
  n.ref = &p.value;
  n.param_name = name;
  n.needs_grad = grad_enabled_ && p.trainable;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::vector<std::uint32_t> parents, BackwardFn backward) {
  if (checked_) {
    for (double v : value.data) {
      if (!std::isfinite(v)) throw ShapeError("checked mode: non-finite value produced");
    }
  }
  Node n;
  n.value = std::move(value);
  n.needs_grad = std::any_of(parents.begin(), parents.end(),
                             [&](std::uint32_t p) { return nodes_[p].needs_grad; });
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::backward(Var loss, ParamStore& store, double scale) {
  if (loss.tape != this) throw ShapeError("backward: loss belongs to another tape");
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + value(loss).shape_string());
  }
  for (auto& [name, p] : store) {
    if (p.trainable && p.grad.empty()) p.grad = Tensor::zeros_like(p.value);
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad(loss.id).data[0] = scale;

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) {
      // The callback may allocate parent gradients but never resizes nodes_.
      n.backward(*this, n.grad);
    } else if (!n.param_name.empty()) {
      Parameter& p = store.at(n.param_name);
      if (!p.trainable) continue;
      if (!p.grad.same_shape(n.grad)) {
        throw ShapeError("backward: gradient shape mismatch for " + n.param_name);
      }
      for (std::size_t k = 0; k < n.grad.size(); ++k) p.grad.data[k] += n.grad.data[k];
    }
  }
}

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tape& t = *a.tape;
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) shape_error("matmul", x, y);
  Tensor out = matrix(x.rows(), y.cols());
  view(out).noalias() = view(x) * view(y);
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value({&tp, ia});
    const Tensor& y = tp.value({&tp, ib});
    if (tp.needs_grad({&tp, ia})) view(tp.grad(ia)).noalias() += view(g) * view(y).transpose();
    if (tp.needs_grad({&tp, ib})) view(tp.grad(ib)).noalias() += view(x).transpose() * view(g);
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b, "matmul_nt");
  Tape& t = *a.tape;
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.cols()) shape_error("matmul_nt", x, y);
  Tensor out = matrix(x.rows(), y.rows());
  view(out).noalias() = view(x) * view(y).transpose();
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value({&tp, ia});
    const Tensor& y = tp.value({&tp, ib});
    if (tp.needs_grad({&tp, ia})) view(tp.grad(ia)).noalias() += view(g) * view(y);
    if (tp.needs_grad({&tp, ib})) view(tp.grad(ib)).noalias() += view(g).transpose() * view(x);
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_error("add", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += y.data[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor& g) {
    for (auto id : {ia, ib}) {
      if (!tp.needs_grad({&tp, id})) continue;
      Tensor& d = tp.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
    }
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row, "add_row");
  const Tensor& x = a.value();
  const Tensor& r = row.value();
  if (r.rows() != 1 || r.cols() != x.cols()) shape_error("add_row", x, r);
  Tensor out = x;
  view(out).rowwise() += view(r).row(0);
  const auto ia = a.id, ir = row.id;
  return a.tape->record(std::move(out), {ia, ir}, [ia, ir](Tape& tp, const Tensor& g) {
    if (tp.needs_grad({&tp, ia})) view(tp.grad(ia)) += view(g);
    if (tp.needs_grad({&tp, ir})) view(tp.grad(ir)).row(0) += view(g).colwise().sum();
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data) v *= s;
  const auto ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, s](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += s * g.data[i];
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  const auto ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value({&tp, ia});
    Tensor& d = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x.data[i] > 0.0) d.data[i] += g.data[i];
    }
  });
}

Var softmax_rows(Var a, bool causal) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out = matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t width = causal ? std::min(cols, r + 1) : cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < width; ++c) mx = std::max(mx, x(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      out(r, c) = std::exp(x(r, c) - mx);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < width; ++c) out(r, c) /= total;
  }
  const auto ia = a.id;
  const auto self = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->record(std::move(out), {ia}, [ia, self](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.value({&tp, self});
    Tensor& d = tp.grad(ia);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < cols; ++c) d(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor& x = a.value();
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) total += std::exp(x(r, c) - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) - lse;
  }
  const auto ia = a.id;
  const auto self = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->record(std::move(out), {ia}, [ia, self](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.value({&tp, self});
    Tensor& d = tp.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) gsum += g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) += g(r, c) - std::exp(y(r, c)) * gsum;
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  const Tensor& in = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  const std::size_t rows = in.rows(), cols = in.cols();
  if (gv.size() != cols || bv.size() != cols) shape_error("layer_norm", in, gv);

  Tensor out = matrix(rows, cols);
  auto normed = std::make_shared<Tensor>(matrix(rows, cols));
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += in(r, c);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (in(r, c) - mean) * (in(r, c) - mean);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xh = (in(r, c) - mean) * is;
      (*normed)(r, c) = xh;
      out(r, c) = xh * gv.data[c] + bv.data[c];
    }
  }
  const auto ix = x.id, ig = gain.id, ib = bias.id;
  return x.tape->record(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, normed, inv_std](Tape& tp, const Tensor& g) {
        const Tensor& gv = tp.value({&tp, ig});
        const std::size_t rows = g.rows(), cols = g.cols();
        const double n = static_cast<double>(cols);
        if (tp.needs_grad({&tp, ig})) {
          Tensor& dg = tp.grad(ig);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) dg.data[c] += g(r, c) * (*normed)(r, c);
        }
        if (tp.needs_grad({&tp, ib})) {
          Tensor& db = tp.grad(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) db.data[c] += g(r, c);
        }
        if (tp.needs_grad({&tp, ix})) {
          Tensor& dx = tp.grad(ix);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dxh = g(r, c) * gv.data[c];
              s1 += dxh;
              s2 += dxh * (*normed)(r, c);
            }
            for (std::size_t c = 0; c < cols; ++c) {
              const double dxh = g(r, c) * gv.data[c];
              dx(r, c) += (*inv_std)[r] / n * (n * dxh - s1 - (*normed)(r, c) * s2);
            }
          }
        }
      });
}

Var embedding_lookup(Var table, std::span<const int> ids) {
  const Tensor& tab = table.value();
  const std::size_t d = tab.cols();
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  Tensor out = matrix(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tab.rows()) {
      throw ShapeError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table " +
                       tab.shape_string());
    }
    std::copy_n(tab.data.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const auto it = table.id;
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape->record(std::move(out), {it},
                            [it, idx = std::move(idx)](Tape& tp, const Tensor& g) {
                              Tensor& dt = tp.grad(it);
                              const std::size_t d = dt.cols();
                              for (std::size_t i = 0; i < idx.size(); ++i)
                                for (std::size_t c = 0; c < d; ++c)
                                  dt.data[idx[i] * d + c] += g.data[i * d + c];
                            });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Tape& t = *parts[0].tape;
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::uint32_t> ids;
  for (const Var& v : parts) {
    require_same_tape(parts[0], v, "concat_rows");
    if (v.value().cols() != cols) shape_error("concat_rows", parts[0].value(), v.value());
    rows += v.value().rows();
    ids.push_back(v.id);
  }
  Tensor out = matrix(rows, cols);
  std::size_t offset = 0;
  for (const Var& v : parts) {
    const Tensor& x = v.value();
    std::copy(x.data.begin(), x.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += x.size();
  }
  return t.record(std::move(out), ids, [ids](Tape& tp, const Tensor& g) {
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t n = tp.value({&tp, id}).size();
      if (tp.needs_grad({&tp, id})) {
        Tensor& d = tp.grad(id);
        for (std::size_t i = 0; i < n; ++i) d.data[i] += g.data[offset + i];
      }
      offset += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = *parts[0].tape;
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::uint32_t> ids;
  for (const Var& v : parts) {
    require_same_tape(parts[0], v, "concat_cols");
    if (v.value().rows() != rows) shape_error("concat_cols", parts[0].value(), v.value());
    cols += v.value().cols();
    ids.push_back(v.id);
  }
  Tensor out = matrix(rows, cols);
  std::size_t offset = 0;
  for (const Var& v : parts) {
    const Tensor& x = v.value();
    view(out).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(x.cols())) =
        view(x);
    offset += x.cols();
  }
  return t.record(std::move(out), ids, [ids](Tape& tp, const Tensor& g) {
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t c = tp.value({&tp, id}).cols();
      if (tp.needs_grad({&tp, id})) {
        view(tp.grad(id)) +=
            view(g).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(c));
      }
      offset += c;
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin >= end || end > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + x.shape_string());
  }
  const std::size_t cols = x.cols();
  Tensor out = matrix(end - begin, cols);
  std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(begin * cols),
            x.data.begin() + static_cast<std::ptrdiff_t>(end * cols), out.data.begin());
  const auto ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, begin, cols](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) d.data[begin * cols + i] += g.data[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin >= end || end > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + x.shape_string());
  }
  Tensor out = matrix(x.rows(), end - begin);
  view(out) = view(x).middleCols(static_cast<Eigen::Index>(begin),
                                 static_cast<Eigen::Index>(end - begin));
  const auto ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, begin](Tape& tp, const Tensor& g) {
    view(tp.grad(ia)).middleCols(static_cast<Eigen::Index>(begin),
                                 static_cast<Eigen::Index>(g.cols())) += view(g);
  });
}

Var mean_rows(Var a) {
  const Tensor& x = a.value();
  Tensor out = matrix(1, x.cols());
  view(out).row(0) = view(x).colwise().mean();
  const auto ia = a.id;
  const double inv = 1.0 / static_cast<double>(x.rows());
  return a.tape->record(std::move(out), {ia}, [ia, inv](Tape& tp, const Tensor& g) {
    view(tp.grad(ia)).rowwise() += view(g).row(0) * inv;
  });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.data) total += v;
  const auto ia = a.id;
  return a.tape->record(Tensor::scalar(total), {ia}, [ia](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad(ia);
    for (double& v : d.data) v += g.data[0];
  });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Tensor& x = logits.value();
  if (targets.size() != x.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     x.shape_string());
  }
  const std::size_t cols = x.cols();
  auto probs = std::make_shared<Tensor>(matrix(x.rows(), cols));
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= cols) {
      throw ShapeError("cross_entropy: target " + std::to_string(targets[r]) +
                       " outside logits " + x.shape_string());
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      (*probs)(r, c) = std::exp(x(r, c) - mx);
      total += (*probs)(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) (*probs)(r, c) /= total;
    loss -= x(r, static_cast<std::size_t>(targets[r])) - mx - std::log(total);
  }
  const auto ia = logits.id;
  std::vector<int> tgt(targets.begin(), targets.end());
  return logits.tape->record(Tensor::scalar(loss), {ia},
                             [ia, probs, tgt = std::move(tgt)](Tape& tp, const Tensor& g) {
                               Tensor& d = tp.grad(ia);
                               const double s = g.data[0];
                               for (std::size_t r = 0; r < probs->rows(); ++r) {
                                 for (std::size_t c = 0; c < probs->cols(); ++c) {
                                   d(r, c) += s * (*probs)(r, c);
                                 }
                                 d(r, static_cast<std::size_t>(tgt[r])) -= s;
                               }
                             });
}

}  // namespace afg::nn
