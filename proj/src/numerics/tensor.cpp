#include "afg/numerics/tensor.hpp"

#include <functional>
#include <numeric>

#include "afg/error.hpp"

namespace afg::nn {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string());
  }
  data.assign(shape_size(shape), fill);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : shape{rows, cols}, data(std::move(values)) {
  if (rows == 0 || cols == 0 || data.size() != rows * cols) {
    throw ShapeError("tensor " + shape_string() + " given " + std::to_string(data.size()) +
                     " values");
  }
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace afg::nn
