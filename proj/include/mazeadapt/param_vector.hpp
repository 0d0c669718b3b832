#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mazeadapt/tensor.hpp"

namespace mazeadapt {

struct ParamSegment {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Named, contiguous flat parameter storage. Segments partition [0, size())
// with no gaps, and unflatten(flatten(v)) is the identity bit for bit --
// the flat array *is* the storage, segment views are just offsets into it.
class ParamVector {
 public:
  ParamVector() = default;

  // Appends a zero-filled segment; names must be unique.
  void add(std::string name, std::vector<std::size_t> shape);

  std::size_t size() const { return data_.size(); }
  std::size_t num_segments() const { return segments_.size(); }
  const ParamSegment& segment(std::size_t i) const;
  const ParamSegment& segment(std::string_view name) const;
  bool has_segment(std::string_view name) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> segment_values(std::string_view name);
  std::span<const double> segment_values(std::string_view name) const;

  // Copy one segment out as a shaped tensor / copy a tensor into a segment.
  Tensor tensor(std::string_view name) const;
  void set_tensor(std::string_view name, const Tensor& t);

  Tensor flat() const;  // rank-1 copy of all values
  void set_flat(std::span<const double> values);

  // Same segment names, shapes and offsets (values may differ).
  bool same_layout(const ParamVector& other) const;
  // Zero-filled vector with this layout.
  ParamVector zeros_like() const;

  // Checkpoint payload: {"segments": [{"name", "shape"}...], "data": [...]}.
  std::string to_json() const;
  static ParamVector from_json(std::string_view text);

 private:
  std::vector<ParamSegment> segments_;
  std::vector<double> data_;
};

// out = params - lr * grads. Layouts must match.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grads, double lr);

// Plain SGD with an optional classical momentum term.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {}

  void step(ParamVector& params, const ParamVector& grads);
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  double momentum_;
  std::vector<double> velocity_;
};

}  // namespace mazeadapt
