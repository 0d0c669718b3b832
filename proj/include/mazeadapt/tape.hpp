#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mazeadapt/tensor.hpp"

namespace mazeadapt::ad {

enum class Op : std::uint8_t {
  Leaf,
  Matmul,
  Add,
  AddBias,
  Relu,
  Sigmoid,
  Concat,
  Scale,
  Slice,
  Reshape,
  Sum,
  BceLoss,
  MseLoss,
  DistanceLoss,
};

// Handle into a Tape. Only meaningful together with the tape that issued it.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Every forward op records one compute node; backward()
// walks the record once in reverse and accumulates gradients into each node
// reachable from the loss. Gradient accumulators start at zero, unreached
// leaves keep a zero gradient, and a second backward on the same tape is a
// StateError. Tapes are independent: distinct tasks can record and
// differentiate concurrently as long as each tape stays on one thread.
//
// Every forward op validates operand shapes (ShapeError names both) and
// checks its output for NaN/Inf (NumericError).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Inputs. Leaves with requires_grad accumulate gradients; constants don't.
  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Primitives.
  Var matmul(Var a, Var b);            // [m x k] . [k x n]
  Var add(Var a, Var b);               // same shape
  Var add_bias(Var m, Var bias);       // [r x c] + [c] broadcast over rows
  Var relu(Var a);
  Var sigmoid(Var a);
  Var concat(std::span<const Var> parts);  // along the last axis
  Var scale(Var a, double s);
  Var slice(Var a, std::size_t offset, std::size_t len);  // rank-1 window
  Var reshape(Var a, std::vector<std::size_t> shape);
  Var sum(Var a);  // scalar

  // Fused losses (targets are constants).
  // Mean binary cross-entropy; predictions clamped to [1e-7, 1 - 1e-7]
  // before the logs.
  Var bce_loss(Var predictions, const Tensor& targets);
  // Mean squared error.
  Var mse_loss(Var predictions, const Tensor& targets);
  // Mean squared difference between the unit-mean-normalized pairwise row
  // distances of `latent` [N x h] and `unit_target_dists`, a constant vector
  // of N(N-1)/2 unit-mean-normalized reference distances in (i,j), i<j,
  // row-major upper-triangle order.
  Var distance_loss(Var latent, const Tensor& unit_target_dists);

  const Tensor& value(Var v) const;
  // Reverse sweep from a scalar loss. Consumes the tape.
  void backward(Var loss);
  // Accumulated gradient; zeros for nodes the loss never reached.
  Tensor grad(Var v) const;

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  static constexpr double kBceClamp = 1e-7;

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<std::int32_t> inputs;
    Tensor value;
    Tensor grad;  // empty until touched by backward
    bool requires_grad = false;
    double scalar = 0.0;      // Scale factor
    std::size_t offset = 0;   // Slice start
    std::vector<Tensor> aux;  // loss targets and saved intermediates
  };

  Var push(Node&& n);
  const Node& node(Var v) const;
  Node& mutable_node(Var v);
  Tensor& grad_buffer(std::int32_t id);
  void check_finite(const Tensor& t, const char* op) const;
  void backward_node(std::int32_t id);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace mazeadapt::ad
