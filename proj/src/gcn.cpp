#include "mazeadapt/gcn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mazeadapt/error.hpp"
#include "mazeadapt/rng.hpp"

namespace mazeadapt {

using nlohmann::json;

const char* gcn_mode_name(GcnMode mode) {
  switch (mode) {
    case GcnMode::Classify: return "classify";
    case GcnMode::Regress: return "regress";
    case GcnMode::DistancePreserve: return "distpreserve";
  }
  return "?";
}

GcnMode gcn_mode_from_name(std::string_view name) {
  if (name == "classify") return GcnMode::Classify;
  if (name == "regress") return GcnMode::Regress;
  if (name == "distpreserve") return GcnMode::DistancePreserve;
  throw ParseError("unknown GCN mode '" + std::string(name) + "'");
}

void GcnConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) {
    throw ContractError("GcnConfig: dimensions must be >= 1");
  }
  if (mode == GcnMode::Classify && output_dim != 1) {
    throw ContractError("GcnConfig: Classify mode requires output_dim == 1");
  }
}

int GcnConfig::num_params() const {
  return input_dim * hidden_dim + hidden_dim + hidden_dim * output_dim + output_dim;
}

Tensor build_propagation_matrix(const GridMaze& maze) {
  const std::size_t num = static_cast<std::size_t>(maze.num_nodes());
  Tensor adj = Tensor::zeros({num, num});
  for (const auto& e : maze.edges) {
    adj.at(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v)) = 1.0;
    adj.at(static_cast<std::size_t>(e.v), static_cast<std::size_t>(e.u)) = 1.0;
  }
  for (std::size_t v = 0; v < num; ++v) adj.at(v, v) = 1.0;  // self-loops
  std::vector<double> inv_sqrt_deg(num);
  for (std::size_t v = 0; v < num; ++v) {
    double deg = 0.0;
    for (std::size_t w = 0; w < num; ++w) deg += adj.at(v, w);
    inv_sqrt_deg[v] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t v = 0; v < num; ++v) {
    for (std::size_t w = 0; w < num; ++w) {
      adj.at(v, w) *= inv_sqrt_deg[v] * inv_sqrt_deg[w];
    }
  }
  return adj;
}

ParamVector init_gcn_params(const GcnConfig& config, std::uint64_t seed) {
  config.validate();
  const auto in = static_cast<std::size_t>(config.input_dim);
  const auto hid = static_cast<std::size_t>(config.hidden_dim);
  const auto out = static_cast<std::size_t>(config.output_dim);
  ParamVector p;
  p.add("w1", {in, hid});
  p.add("b1", {hid});
  p.add("w2", {hid, out});
  p.add("b2", {out});
  Rng rng(seed);
  const double bound1 = std::sqrt(6.0 / static_cast<double>(in + hid));
  fill_uniform(p.segment_values("w1"), -bound1, bound1, rng);
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hid + out));
  fill_uniform(p.segment_values("w2"), -bound2, bound2, rng);
  return p;
}

GcnVars gcn_param_leaves(ad::Tape& tape, const ParamVector& params, bool requires_grad) {
  return GcnVars{
      tape.leaf(params.tensor("w1"), requires_grad),
      tape.leaf(params.tensor("b1"), requires_grad),
      tape.leaf(params.tensor("w2"), requires_grad),
      tape.leaf(params.tensor("b2"), requires_grad),
  };
}

GcnVars gcn_split_flat(ad::Tape& tape, ad::Var theta_flat, const GcnConfig& config) {
  const auto in = static_cast<std::size_t>(config.input_dim);
  const auto hid = static_cast<std::size_t>(config.hidden_dim);
  const auto out = static_cast<std::size_t>(config.output_dim);
  std::size_t at = 0;
  auto take = [&](std::size_t len, std::vector<std::size_t> shape) {
    ad::Var flat = tape.slice(theta_flat, at, len);
    at += len;
    return tape.reshape(flat, std::move(shape));
  };
  GcnVars vars;
  vars.w1 = take(in * hid, {in, hid});
  vars.b1 = take(hid, {hid});
  vars.w2 = take(hid * out, {hid, out});
  vars.b2 = take(out, {out});
  if (at != tape.value(theta_flat).numel()) {
    throw ContractError("gcn_split_flat: flat parameter vector length " +
                        std::to_string(tape.value(theta_flat).numel()) +
                        " does not match config (" + std::to_string(at) + " expected)");
  }
  return vars;
}

GcnTapeOutput gcn_forward_tape(ad::Tape& tape, const Tensor& features, const Tensor& a_hat,
                               const GcnVars& vars, const GcnConfig& config) {
  if (features.cols() != static_cast<std::size_t>(config.input_dim)) {
    throw ShapeError("gcn_forward: feature width " + features.shape_str() +
                     " does not match input_dim " + std::to_string(config.input_dim));
  }
  ad::Var x = tape.constant(features);
  ad::Var a = tape.constant(a_hat);
  ad::Var h1 = tape.add_bias(tape.matmul(a, tape.matmul(x, vars.w1)), vars.b1);
  ad::Var z = tape.relu(h1);
  ad::Var logits = tape.add_bias(tape.matmul(a, tape.matmul(z, vars.w2)), vars.b2);
  ad::Var y = config.mode == GcnMode::Classify ? tape.sigmoid(logits) : logits;
  return GcnTapeOutput{y, z};
}

GcnOutput gcn_forward(const Tensor& features, const Tensor& a_hat, const ParamVector& params,
                      const GcnConfig& config) {
  ad::Tape tape;
  GcnVars vars = gcn_param_leaves(tape, params, /*requires_grad=*/false);
  GcnTapeOutput out = gcn_forward_tape(tape, features, a_hat, vars, config);
  return GcnOutput{tape.value(out.y), tape.value(out.z)};
}

namespace {

// One gradient-descent pass shared by the training modes. `build_loss`
// records the forward pass for the current parameters and returns the loss.
template <typename BuildLoss>
ParamVector descend(ParamVector params, const TrainHyper& hyper, BuildLoss&& build_loss,
                    TrainTrace* trace) {
  if (hyper.epochs < 0) throw ContractError("train: epochs must be >= 0");
  SgdOptimizer opt(hyper.lr, hyper.momentum);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    ad::Tape tape;
    GcnVars vars = gcn_param_leaves(tape, params, /*requires_grad=*/true);
    ad::Var loss;
    try {
      loss = build_loss(tape, vars);
    } catch (const NumericError& e) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) + " (" +
                          e.what() + "); try a smaller learning rate");
    }
    if (trace) trace->loss.push_back(tape.value(loss).data[0]);
    tape.backward(loss);
    ParamVector grads = params.zeros_like();
    grads.set_tensor("w1", tape.grad(vars.w1));
    grads.set_tensor("b1", tape.grad(vars.b1));
    grads.set_tensor("w2", tape.grad(vars.w2));
    grads.set_tensor("b2", tape.grad(vars.b2));
    opt.step(params, grads);
  }
  return params;
}

}  // namespace

ParamVector train_first_order(const GridMaze& maze, const PathLabels& labels,
                              const GcnConfig& config, const TrainHyper& hyper,
                              std::uint64_t init_seed, TrainTrace* trace) {
  config.validate();
  if (config.mode != GcnMode::Classify) {
    throw ContractError("train_first_order: config.mode must be Classify");
  }
  if (labels.labels.size() != static_cast<std::size_t>(maze.num_nodes())) {
    throw ContractError("train_first_order: label count does not match maze");
  }
  const Tensor a_hat = build_propagation_matrix(maze);
  Tensor targets = Tensor::zeros({labels.labels.size(), 1});
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    targets.data[i] = static_cast<double>(labels.labels[i]);
  }
  ParamVector params = init_gcn_params(config, init_seed);
  return descend(
      std::move(params), hyper,
      [&](ad::Tape& tape, const GcnVars& vars) {
        GcnTapeOutput out = gcn_forward_tape(tape, maze.features, a_hat, vars, config);
        return tape.bce_loss(out.y, targets);
      },
      trace);
}

Tensor value_features(int n, const RewardMask& mask) {
  if (mask.n != n) throw ContractError("value_features: mask size does not match n");
  const std::size_t num = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  Tensor f = Tensor::zeros({num, 3});
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const auto idx = static_cast<std::size_t>(x + n * y);
      f.at(idx, 0) = x;
      f.at(idx, 1) = y;
      f.at(idx, 2) = static_cast<double>(mask.mult[idx]) * static_cast<double>(x + y);
    }
  }
  return f;
}

ParamVector train_value_regressor(int n, const RewardMask& mask, const ValueTable& values,
                                  const GcnConfig& config, const TrainHyper& hyper,
                                  std::uint64_t init_seed, TrainTrace* trace) {
  config.validate();
  if (config.mode != GcnMode::Regress) {
    throw ContractError("train_value_regressor: config.mode must be Regress");
  }
  if (values.n != n) throw ContractError("train_value_regressor: value table size mismatch");
  const GridMaze grid = create_maze_graph(n, 0.0, 0, /*require_connected=*/false);
  const Tensor a_hat = build_propagation_matrix(grid);
  const Tensor features = value_features(n, mask);
  Tensor targets = Tensor::zeros({values.values.size(), 1});
  for (std::size_t i = 0; i < values.values.size(); ++i) targets.data[i] = values.values[i];
  ParamVector params = init_gcn_params(config, init_seed);
  return descend(
      std::move(params), hyper,
      [&](ad::Tape& tape, const GcnVars& vars) {
        GcnTapeOutput out = gcn_forward_tape(tape, features, a_hat, vars, config);
        return tape.mse_loss(out.y, targets);
      },
      trace);
}

Tensor unit_mean_grid_distances(const GridMaze& maze) {
  const std::size_t num = static_cast<std::size_t>(maze.num_nodes());
  if (num < 2) throw ContractError("unit_mean_grid_distances: need at least 2 nodes");
  const std::size_t pairs = num * (num - 1) / 2;
  Tensor d = Tensor::zeros({pairs});
  std::size_t p = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < num; ++i) {
    const auto [xi, yi] = maze.coords(static_cast<int>(i));
    for (std::size_t j = i + 1; j < num; ++j, ++p) {
      const auto [xj, yj] = maze.coords(static_cast<int>(j));
      const double dx = xi - xj, dy = yi - yj;
      d.data[p] = std::sqrt(dx * dx + dy * dy);
      total += d.data[p];
    }
  }
  const double mean = total / static_cast<double>(pairs);
  for (double& v : d.data) v /= mean;
  return d;
}

ParamVector train_distance_preserving(std::span<const GridMaze> mazes, const GcnConfig& config,
                                      const TrainHyper& hyper, std::uint64_t init_seed,
                                      bool normalized_coords, TrainTrace* trace) {
  config.validate();
  if (config.mode != GcnMode::DistancePreserve) {
    throw ContractError("train_distance_preserving: config.mode must be DistancePreserve");
  }
  if (config.input_dim != 2) {
    throw ContractError("train_distance_preserving: coordinate features require input_dim == 2");
  }
  if (mazes.empty()) throw ContractError("train_distance_preserving: no training mazes");
  for (const GridMaze& m : mazes) {
    if (m.num_nodes() < 2) {
      throw ContractError("train_distance_preserving: degenerate maze with no node pairs");
    }
  }
  struct Prepared {
    Tensor features, a_hat, target;
  };
  std::vector<Prepared> prep;
  prep.reserve(mazes.size());
  for (const GridMaze& m : mazes) {
    prep.push_back({coordinate_features(m, normalized_coords), build_propagation_matrix(m),
                    unit_mean_grid_distances(m)});
  }
  ParamVector params = init_gcn_params(config, init_seed);
  return descend(
      std::move(params), hyper,
      [&](ad::Tape& tape, const GcnVars& vars) {
        ad::Var total;
        for (std::size_t t = 0; t < prep.size(); ++t) {
          GcnTapeOutput out = gcn_forward_tape(tape, prep[t].features, prep[t].a_hat, vars, config);
          ad::Var loss = tape.distance_loss(out.z, prep[t].target);
          total = t == 0 ? loss : tape.add(total, loss);
        }
        return tape.scale(total, 1.0 / static_cast<double>(prep.size()));
      },
      trace);
}

std::string gcn_to_json(const GcnConfig& config, const ParamVector& params) {
  json j;
  j["schema"] = 1;
  j["model"] = "gcn";
  j["config"] = {{"input_dim", config.input_dim},
                 {"hidden_dim", config.hidden_dim},
                 {"output_dim", config.output_dim},
                 {"mode", gcn_mode_name(config.mode)}};
  j["params"] = json::parse(params.to_json());
  return j.dump(2) + "\n";
}

std::pair<GcnConfig, ParamVector> gcn_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("gcn checkpoint: ") + e.what());
  }
  try {
    if (j.at("model").get<std::string>() != "gcn") {
      throw ParseError("gcn checkpoint: 'model' is not \"gcn\"");
    }
    GcnConfig config;
    const auto& c = j.at("config");
    config.input_dim = c.at("input_dim").get<int>();
    config.hidden_dim = c.at("hidden_dim").get<int>();
    config.output_dim = c.at("output_dim").get<int>();
    config.mode = gcn_mode_from_name(c.at("mode").get<std::string>());
    config.validate();
    ParamVector params = ParamVector::from_json(j.at("params").dump());
    if (params.size() != static_cast<std::size_t>(config.num_params())) {
      throw ParseError("gcn checkpoint: parameter count does not match config");
    }
    return {config, std::move(params)};
  } catch (const json::exception& e) {
    throw ParseError(std::string("gcn checkpoint: ") + e.what());
  }
}

void save_gcn(const GcnConfig& config, const ParamVector& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << gcn_to_json(config, params);
}

std::pair<GcnConfig, ParamVector> load_gcn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return gcn_from_json(buf.str());
}

}  // namespace mazeadapt
