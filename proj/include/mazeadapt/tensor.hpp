#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace mazeadapt {

// Dense row-major tensor of 64-bit floats. Everything in this project is a
// scalar, vector or matrix; higher ranks are representable but unused.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value);  // shape {1}
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor vector(std::vector<double> data);

  std::size_t numel() const;
  std::size_t rank() const { return shape.size(); }
  bool is_matrix() const { return shape.size() == 2; }
  bool is_vector() const { return shape.size() == 1; }
  std::size_t rows() const;
  std::size_t cols() const;

  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "[3x4]"
};

// Exact elementwise equality, shape included.
bool operator==(const Tensor& a, const Tensor& b);
inline bool operator!=(const Tensor& a, const Tensor& b) { return !(a == b); }

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace mazeadapt
