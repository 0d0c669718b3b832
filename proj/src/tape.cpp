#include "mazeadapt/tape.hpp"

#include <cmath>
#include <string>

#include "mazeadapt/error.hpp"
#include "mazeadapt/kernels.hpp"

namespace mazeadapt::ad {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

}  // namespace

Var Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractError("invalid tape handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Tape::Node& Tape::mutable_node(Var v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

void Tape::check_finite(const Tensor& t, const char* op) const {
  if (!t.all_finite()) {
    throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  check_finite(value, "leaf");
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (!na.value.is_matrix() || !nb.value.is_matrix() || na.value.cols() != nb.value.rows()) {
    throw ShapeError("matmul: operands do not conform, lhs " + na.value.shape_str() + " rhs " +
                     nb.value.shape_str());
  }
  const std::size_t m = na.value.rows(), k = na.value.cols(), n = nb.value.cols();
  Node out;
  out.op = Op::Matmul;
  out.inputs = {a.id, b.id};
  out.requires_grad = na.requires_grad || nb.requires_grad;
  out.value = Tensor::zeros({m, n});
  kernels::matmul(na.value.data.data(), nb.value.data.data(), out.value.data.data(), m, k, n);
  check_finite(out.value, "matmul");
  return push(std::move(out));
}

Var Tape::add(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (!na.value.same_shape(nb.value)) {
    throw ShapeError("add: shapes differ, lhs " + na.value.shape_str() + " rhs " +
                     nb.value.shape_str());
  }
  Node out;
  out.op = Op::Add;
  out.inputs = {a.id, b.id};
  out.requires_grad = na.requires_grad || nb.requires_grad;
  out.value = Tensor::zeros(na.value.shape);
  kernels::add(na.value.data.data(), nb.value.data.data(), out.value.data.data(),
               na.value.numel());
  check_finite(out.value, "add");
  return push(std::move(out));
}

Var Tape::add_bias(Var m, Var bias) {
  const Node& nm = node(m);
  const Node& nb = node(bias);
  if (!nm.value.is_matrix() || !nb.value.is_vector() || nm.value.cols() != nb.value.numel()) {
    throw ShapeError("add_bias: matrix " + nm.value.shape_str() + " does not conform with bias " +
                     nb.value.shape_str());
  }
  Node out;
  out.op = Op::AddBias;
  out.inputs = {m.id, bias.id};
  out.requires_grad = nm.requires_grad || nb.requires_grad;
  out.value = nm.value;
  const std::size_t rows = nm.value.rows(), cols = nm.value.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    kernels::add(out.value.data.data() + r * cols, nb.value.data.data(),
                 out.value.data.data() + r * cols, cols);
  }
  check_finite(out.value, "add_bias");
  return push(std::move(out));
}

Var Tape::relu(Var a) {
  const Node& na = node(a);
  Node out;
  out.op = Op::Relu;
  out.inputs = {a.id};
  out.requires_grad = na.requires_grad;
  out.value = Tensor::zeros(na.value.shape);
  kernels::relu(na.value.data.data(), out.value.data.data(), na.value.numel());
  check_finite(out.value, "relu");
  return push(std::move(out));
}

Var Tape::sigmoid(Var a) {
  const Node& na = node(a);
  Node out;
  out.op = Op::Sigmoid;
  out.inputs = {a.id};
  out.requires_grad = na.requires_grad;
  out.value = Tensor::zeros(na.value.shape);
  for (std::size_t i = 0; i < na.value.numel(); ++i) {
    out.value.data[i] = stable_sigmoid(na.value.data[i]);
  }
  check_finite(out.value, "sigmoid");
  return push(std::move(out));
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat: no operands");
  const Node& first = node(parts.front());
  const std::size_t rank = first.value.rank();
  if (rank != 1 && rank != 2) {
    throw ShapeError("concat: rank-1 or rank-2 operands required, got " + first.value.shape_str());
  }
  Node out;
  out.op = Op::Concat;
  std::size_t total_last = 0;
  for (Var p : parts) {
    const Node& np = node(p);
    if (np.value.rank() != rank || (rank == 2 && np.value.rows() != first.value.rows())) {
      throw ShapeError("concat: operand " + np.value.shape_str() + " does not conform with " +
                       first.value.shape_str());
    }
    total_last += np.value.shape[rank - 1];
    out.inputs.push_back(p.id);
    out.requires_grad = out.requires_grad || np.requires_grad;
  }
  if (rank == 1) {
    out.value = Tensor::zeros({total_last});
    std::size_t at = 0;
    for (Var p : parts) {
      const Tensor& v = node(p).value;
      std::copy(v.data.begin(), v.data.end(), out.value.data.begin() + at);
      at += v.numel();
    }
  } else {
    const std::size_t rows = first.value.rows();
    out.value = Tensor::zeros({rows, total_last});
    std::size_t col_at = 0;
    for (Var p : parts) {
      const Tensor& v = node(p).value;
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy(v.data.begin() + r * v.cols(), v.data.begin() + (r + 1) * v.cols(),
                  out.value.data.begin() + r * total_last + col_at);
      }
      col_at += v.cols();
    }
  }
  check_finite(out.value, "concat");
  return push(std::move(out));
}

Var Tape::scale(Var a, double s) {
  const Node& na = node(a);
  Node out;
  out.op = Op::Scale;
  out.inputs = {a.id};
  out.requires_grad = na.requires_grad;
  out.scalar = s;
  out.value = Tensor::zeros(na.value.shape);
  kernels::scale(na.value.data.data(), s, out.value.data.data(), na.value.numel());
  check_finite(out.value, "scale");
  return push(std::move(out));
}

Var Tape::slice(Var a, std::size_t offset, std::size_t len) {
  const Node& na = node(a);
  if (!na.value.is_vector()) {
    throw ShapeError("slice: rank-1 operand required, got " + na.value.shape_str());
  }
  if (offset + len > na.value.numel()) {
    throw ContractError("slice: window [" + std::to_string(offset) + ", " +
                        std::to_string(offset + len) + ") exceeds length " +
                        std::to_string(na.value.numel()));
  }
  Node out;
  out.op = Op::Slice;
  out.inputs = {a.id};
  out.requires_grad = na.requires_grad;
  out.offset = offset;
  out.value = Tensor({len}, std::vector<double>(na.value.data.begin() + offset,
                                                na.value.data.begin() + offset + len));
  return push(std::move(out));
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  const Node& na = node(a);
  if (shape_numel(shape) != na.value.numel()) {
    throw ShapeError("reshape: " + na.value.shape_str() + " has " +
                     std::to_string(na.value.numel()) + " elements, target " +
                     shape_to_string(shape) + " wants " + std::to_string(shape_numel(shape)));
  }
  Node out;
  out.op = Op::Reshape;
  out.inputs = {a.id};
  out.requires_grad = na.requires_grad;
  out.value = Tensor(std::move(shape), na.value.data);
  return push(std::move(out));
}

Var Tape::sum(Var a) {
  const Node& na = node(a);
  double total = 0.0;
  for (double v : na.value.data) total += v;
  Node out;
  out.op = Op::Sum;
  out.inputs = {a.id};
  out.requires_grad = na.requires_grad;
  out.value = Tensor::scalar(total);
  check_finite(out.value, "sum");
  return push(std::move(out));
}

Var Tape::bce_loss(Var predictions, const Tensor& targets) {
  const Node& np = node(predictions);
  if (np.value.numel() != targets.numel()) {
    throw ShapeError("bce_loss: predictions " + np.value.shape_str() + " vs targets " +
                     targets.shape_str());
  }
  if (targets.numel() == 0) throw ContractError("bce_loss: empty targets");
  const double lo = kBceClamp, hi = 1.0 - kBceClamp;
  const std::size_t n = targets.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(np.value.data[i], lo, hi);
    const double t = targets.data[i];
    total += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  Node out;
  out.op = Op::BceLoss;
  out.inputs = {predictions.id};
  out.requires_grad = np.requires_grad;
  out.aux.push_back(targets);
  out.value = Tensor::scalar(total / static_cast<double>(n));
  check_finite(out.value, "bce_loss");
  return push(std::move(out));
}

Var Tape::mse_loss(Var predictions, const Tensor& targets) {
  const Node& np = node(predictions);
  if (np.value.numel() != targets.numel()) {
    throw ShapeError("mse_loss: predictions " + np.value.shape_str() + " vs targets " +
                     targets.shape_str());
  }
  if (targets.numel() == 0) throw ContractError("mse_loss: empty targets");
  const std::size_t n = targets.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = np.value.data[i] - targets.data[i];
    total += d * d;
  }
  Node out;
  out.op = Op::MseLoss;
  out.inputs = {predictions.id};
  out.requires_grad = np.requires_grad;
  out.aux.push_back(targets);
  out.value = Tensor::scalar(total / static_cast<double>(n));
  check_finite(out.value, "mse_loss");
  return push(std::move(out));
}

Var Tape::distance_loss(Var latent, const Tensor& unit_target_dists) {
  const Node& nl = node(latent);
  if (!nl.value.is_matrix()) {
    throw ShapeError("distance_loss: latent must be a matrix, got " + nl.value.shape_str());
  }
  const std::size_t rows = nl.value.rows();
  if (rows < 2) {
    throw ContractError("distance_loss: need at least 2 rows, got " + std::to_string(rows));
  }
  const std::size_t pairs = pair_count(rows);
  if (unit_target_dists.numel() != pairs) {
    throw ShapeError("distance_loss: expected " + std::to_string(pairs) + " target distances, got " +
                     unit_target_dists.shape_str());
  }
  const std::size_t h = nl.value.cols();
  Tensor dists = Tensor::zeros({pairs});
  std::size_t p = 0;
  double dist_sum = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = i + 1; j < rows; ++j, ++p) {
      double sq = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        const double d = nl.value.at(i, k) - nl.value.at(j, k);
        sq += d * d;
      }
      dists.data[p] = std::sqrt(sq);
      dist_sum += dists.data[p];
    }
  }
  const double mean = dist_sum / static_cast<double>(pairs);
  if (!(mean > 0.0)) {
    throw NumericError("distance_loss: latent pairwise distances are all zero");
  }
  double total = 0.0;
  for (std::size_t q = 0; q < pairs; ++q) {
    const double e = dists.data[q] / mean - unit_target_dists.data[q];
    total += e * e;
  }
  Node out;
  out.op = Op::DistanceLoss;
  out.inputs = {latent.id};
  out.requires_grad = nl.requires_grad;
  out.aux.push_back(unit_target_dists);
  out.aux.push_back(std::move(dists));
  out.value = Tensor::scalar(total / static_cast<double>(pairs));
  check_finite(out.value, "distance_loss");
  return push(std::move(out));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Tensor& Tape::grad_buffer(std::int32_t id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.data.empty()) return Tensor::zeros(n.value.shape);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) {
    throw StateError("tape already consumed: run a new forward pass before backward");
  }
  const Node& ln = node(loss);
  if (ln.value.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + ln.value.shape_str());
  }
  consumed_ = true;
  if (!ln.requires_grad) return;  // loss does not depend on any parameter
  grad_buffer(loss.id).data[0] = 1.0;
  for (std::int32_t id = loss.id; id >= 0; --id) {
    backward_node(id);
  }
}

void Tape::backward_node(std::int32_t id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad || n.grad.data.empty()) return;
  const Tensor& g = n.grad;

  auto input_needs = [&](std::size_t slot) {
    return nodes_[static_cast<std::size_t>(n.inputs[slot])].requires_grad;
  };

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Matmul: {
      const Node& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
      const Node& b = nodes_[static_cast<std::size_t>(n.inputs[1])];
      const std::size_t m = a.value.rows(), k = a.value.cols(), c = b.value.cols();
      if (input_needs(0)) {
        // gA += g . B^T
        std::vector<double> bt(k * c);
        kernels::transpose(b.value.data.data(), bt.data(), k, c);
        std::vector<double> ga(m * k);
        kernels::matmul(g.data.data(), bt.data(), ga.data(), m, c, k);
        kernels::axpy(1.0, ga.data(), grad_buffer(n.inputs[0]).data.data(), m * k);
      }
      if (input_needs(1)) {
        // gB += A^T . g
        std::vector<double> at(m * k);
        kernels::transpose(a.value.data.data(), at.data(), m, k);
        std::vector<double> gb(k * c);
        kernels::matmul(at.data(), g.data.data(), gb.data(), k, m, c);
        kernels::axpy(1.0, gb.data(), grad_buffer(n.inputs[1]).data.data(), k * c);
      }
      break;
    }
    case Op::Add: {
      for (std::size_t s = 0; s < 2; ++s) {
        if (input_needs(s)) {
          kernels::axpy(1.0, g.data.data(), grad_buffer(n.inputs[s]).data.data(), g.numel());
        }
      }
      break;
    }
    case Op::AddBias: {
      if (input_needs(0)) {
        kernels::axpy(1.0, g.data.data(), grad_buffer(n.inputs[0]).data.data(), g.numel());
      }
      if (input_needs(1)) {
        Tensor& gb = grad_buffer(n.inputs[1]);
        const std::size_t rows = g.rows(), cols = g.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          kernels::add(gb.data.data(), g.data.data() + r * cols, gb.data.data(), cols);
        }
      }
      break;
    }
    case Op::Relu: {
      if (input_needs(0)) {
        const Node& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        std::vector<double> gi(g.numel());
        kernels::relu_backward(a.value.data.data(), g.data.data(), gi.data(), g.numel());
        kernels::axpy(1.0, gi.data(), grad_buffer(n.inputs[0]).data.data(), g.numel());
      }
      break;
    }
    case Op::Sigmoid: {
      if (input_needs(0)) {
        Tensor& gi = grad_buffer(n.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double y = n.value.data[i];
          gi.data[i] += g.data[i] * y * (1.0 - y);
        }
      }
      break;
    }
    case Op::Concat: {
      const std::size_t rank = n.value.rank();
      if (rank == 1) {
        std::size_t at = 0;
        for (std::int32_t in : n.inputs) {
          const std::size_t len = nodes_[static_cast<std::size_t>(in)].value.numel();
          if (nodes_[static_cast<std::size_t>(in)].requires_grad) {
            kernels::add(grad_buffer(in).data.data(), g.data.data() + at,
                         grad_buffer(in).data.data(), len);
          }
          at += len;
        }
      } else {
        const std::size_t rows = n.value.rows(), total = n.value.cols();
        std::size_t col_at = 0;
        for (std::int32_t in : n.inputs) {
          const Node& part = nodes_[static_cast<std::size_t>(in)];
          const std::size_t cols = part.value.cols();
          if (part.requires_grad) {
            Tensor& gi = grad_buffer(in);
            for (std::size_t r = 0; r < rows; ++r) {
              kernels::add(gi.data.data() + r * cols, g.data.data() + r * total + col_at,
                           gi.data.data() + r * cols, cols);
            }
          }
          col_at += cols;
        }
      }
      break;
    }
    case Op::Scale: {
      if (input_needs(0)) {
        kernels::axpy(n.scalar, g.data.data(), grad_buffer(n.inputs[0]).data.data(), g.numel());
      }
      break;
    }
    case Op::Slice: {
      if (input_needs(0)) {
        Tensor& gi = grad_buffer(n.inputs[0]);
        kernels::add(gi.data.data() + n.offset, g.data.data(), gi.data.data() + n.offset,
                     g.numel());
      }
      break;
    }
    case Op::Reshape: {
      if (input_needs(0)) {
        kernels::axpy(1.0, g.data.data(), grad_buffer(n.inputs[0]).data.data(), g.numel());
      }
      break;
    }
    case Op::Sum: {
      if (input_needs(0)) {
        Tensor& gi = grad_buffer(n.inputs[0]);
        const double gs = g.data[0];
        for (double& v : gi.data) v += gs;
      }
      break;
    }
    case Op::BceLoss: {
      if (input_needs(0)) {
        const Node& p = nodes_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& t = n.aux[0];
        Tensor& gi = grad_buffer(n.inputs[0]);
        const double lo = kBceClamp, hi = 1.0 - kBceClamp;
        const double inv_n = 1.0 / static_cast<double>(t.numel());
        const double gs = g.data[0];
        for (std::size_t i = 0; i < t.numel(); ++i) {
          const double pv = p.value.data[i];
          if (pv <= lo || pv >= hi) continue;  // clamped region, zero slope
          gi.data[i] += gs * inv_n * (-(t.data[i] / pv) + (1.0 - t.data[i]) / (1.0 - pv));
        }
      }
      break;
    }
    case Op::MseLoss: {
      if (input_needs(0)) {
        const Node& p = nodes_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& t = n.aux[0];
        Tensor& gi = grad_buffer(n.inputs[0]);
        const double inv_n = 1.0 / static_cast<double>(t.numel());
        const double gs = g.data[0];
        for (std::size_t i = 0; i < t.numel(); ++i) {
          gi.data[i] += gs * inv_n * 2.0 * (p.value.data[i] - t.data[i]);
        }
      }
      break;
    }
    case Op::DistanceLoss: {
      if (input_needs(0)) {
        const Node& z = nodes_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& target = n.aux[0];
        const Tensor& dists = n.aux[1];
        const std::size_t rows = z.value.rows(), h = z.value.cols();
        const std::size_t pairs = dists.numel();
        const double inv_p = 1.0 / static_cast<double>(pairs);
        double mean = 0.0;
        for (double d : dists.data) mean += d;
        mean *= inv_p;
        // L = (1/P) sum_p (d_p/m - u_p)^2 with m = (1/P) sum_q d_q:
        // dL/dd_q = 2 e_q / (P m) - 2 S / (P^2 m^2),  e_p = d_p/m - u_p,
        // S = sum_p e_p d_p.
        double s = 0.0;
        for (std::size_t q = 0; q < pairs; ++q) {
          s += (dists.data[q] / mean - target.data[q]) * dists.data[q];
        }
        std::vector<double> dl_dd(pairs);
        for (std::size_t q = 0; q < pairs; ++q) {
          const double e = dists.data[q] / mean - target.data[q];
          dl_dd[q] = 2.0 * e * inv_p / mean - 2.0 * s * inv_p * inv_p / (mean * mean);
        }
        Tensor& gi = grad_buffer(n.inputs[0]);
        const double gs = g.data[0];
        std::size_t q = 0;
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = i + 1; j < rows; ++j, ++q) {
            const double d = dists.data[q];
            if (d == 0.0) continue;  // subgradient 0 at coincident rows
            const double coeff = gs * dl_dd[q] / d;
            for (std::size_t k = 0; k < h; ++k) {
              const double diff = z.value.at(i, k) - z.value.at(j, k);
              gi.at(i, k) += coeff * diff;
              gi.at(j, k) -= coeff * diff;
            }
          }
        }
      }
      break;
    }
  }
}

}  // namespace mazeadapt::ad
