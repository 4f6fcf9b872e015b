#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace afg::nn {

// Dense row-major tensor of doubles. Operations view a tensor as a matrix:
// rank 1 is a 1 x n row, rank 2 is rows x cols.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape); }
  static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  std::size_t rows() const { return shape.size() <= 1 ? 1 : shape[0]; }
  std::size_t cols() const {
    if (shape.size() == 2) return shape[1];
    if (shape.empty()) return 0;
    if (shape.size() == 1) return shape[0];
    return data.size() / shape[0];
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  std::string shape_string() const;

  bool operator==(const Tensor&) const = default;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

}  // namespace afg::nn
