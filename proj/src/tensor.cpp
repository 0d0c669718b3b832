#include "mazeadapt/tensor.hpp"

#include <cmath>
#include <sstream>

#include "mazeadapt/error.hpp"

namespace mazeadapt {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape) + " does not match data length " +
                     std::to_string(data.size()));
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::vector(std::vector<double> data) {
  std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

std::size_t Tensor::numel() const { return data.size(); }

std::size_t Tensor::rows() const {
  if (shape.size() != 2) throw ShapeError("rows() on non-matrix tensor " + shape_str());
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() != 2) throw ShapeError("cols() on non-matrix tensor " + shape_str());
  return shape[1];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.data == b.data;
}

}  // namespace mazeadapt
