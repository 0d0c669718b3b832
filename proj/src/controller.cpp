#include "mazeadapt/controller.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mazeadapt/error.hpp"
#include "mazeadapt/rng.hpp"

namespace mazeadapt {

using nlohmann::json;

const char* controller_input_name(ControllerInput input) {
  return input == ControllerInput::Basic ? "basic" : "enriched";
}

ControllerInput controller_input_from_name(std::string_view name) {
  if (name == "basic") return ControllerInput::Basic;
  if (name == "enriched") return ControllerInput::Enriched;
  throw ParseError("unknown controller input spec '" + std::string(name) + "'");
}

void ControllerConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw ContractError("ControllerConfig: input_dim/output_dim must be set and >= 1");
  }
  for (int h : hidden) {
    if (h < 1) throw ContractError("ControllerConfig: hidden widths must be >= 1");
  }
  if (!(delta_scale > 0.0)) throw ContractError("ControllerConfig: delta_scale must be positive");
}

int controller_input_dim(ControllerInput input, const GcnConfig& gcn, int num_nodes) {
  const int basic = gcn.output_dim * num_nodes + gcn.num_params();
  if (input == ControllerInput::Basic) return basic;
  return gcn.hidden_dim * num_nodes + basic;
}

namespace {

std::vector<int> layer_dims(const ControllerConfig& config) {
  std::vector<int> dims;
  dims.push_back(config.input_dim);
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.output_dim);
  return dims;
}

std::string weight_name(std::size_t layer) { return "w" + std::to_string(layer); }
std::string bias_name(std::size_t layer) { return "b" + std::to_string(layer); }

}  // namespace

ParamVector init_controller_params(const ControllerConfig& config, std::uint64_t seed) {
  config.validate();
  const std::vector<int> dims = layer_dims(config);
  ParamVector phi;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    phi.add(weight_name(l), {static_cast<std::size_t>(dims[l]),
                             static_cast<std::size_t>(dims[l + 1])});
    phi.add(bias_name(l), {static_cast<std::size_t>(dims[l + 1])});
  }
  Rng rng(seed);
  const std::size_t last = dims.size() - 2;
  for (std::size_t l = 0; l < last; ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    fill_uniform(phi.segment_values(weight_name(l)), -bound, bound, rng);
  }
  // Output layer stays zero: the first epoch evaluates the unadapted baseline.
  return phi;
}

Tensor build_controller_input(const GcnOutput& base, const ParamVector& theta,
                              ControllerInput input) {
  std::vector<double> data;
  if (input == ControllerInput::Enriched) {
    data.insert(data.end(), base.z.data.begin(), base.z.data.end());
  }
  data.insert(data.end(), base.y.data.begin(), base.y.data.end());
  const auto theta_values = theta.values();
  data.insert(data.end(), theta_values.begin(), theta_values.end());
  const std::size_t dim = data.size();
  return Tensor({1, dim}, std::move(data));
}

ad::Var controller_forward_tape(ad::Tape& tape, const Tensor& input,
                                std::span<const ad::Var> phi_vars,
                                const ControllerConfig& config) {
  if (input.rank() != 2 || input.rows() != 1 ||
      input.cols() != static_cast<std::size_t>(config.input_dim)) {
    throw ContractError("controller input length " +
                        std::to_string(input.numel()) + " does not match expected input_dim " +
                        std::to_string(config.input_dim));
  }
  const std::size_t num_layers = config.hidden.size() + 1;
  if (phi_vars.size() != 2 * num_layers) {
    throw ContractError("controller_forward_tape: wrong number of parameter vars");
  }
  ad::Var x = tape.constant(input);
  for (std::size_t l = 0; l < num_layers; ++l) {
    x = tape.add_bias(tape.matmul(x, phi_vars[2 * l]), phi_vars[2 * l + 1]);
    if (l + 1 < num_layers) x = tape.relu(x);
  }
  x = tape.scale(x, config.delta_scale);
  return tape.reshape(x, {static_cast<std::size_t>(config.output_dim)});
}

namespace {

std::vector<ad::Var> controller_param_leaves(ad::Tape& tape, const ParamVector& phi,
                                             const ControllerConfig& config, bool requires_grad) {
  std::vector<ad::Var> vars;
  const std::size_t num_layers = config.hidden.size() + 1;
  for (std::size_t l = 0; l < num_layers; ++l) {
    vars.push_back(tape.leaf(phi.tensor(weight_name(l)), requires_grad));
    vars.push_back(tape.leaf(phi.tensor(bias_name(l)), requires_grad));
  }
  return vars;
}

ParamVector delta_from_flat(const ParamVector& theta, const Tensor& flat) {
  ParamVector delta = theta.zeros_like();
  delta.set_flat(flat.data);
  return delta;
}

}  // namespace

ParamVector controller_forward(const GcnOutput& base_output, const ParamVector& theta,
                               const ParamVector& phi, const ControllerConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(config.output_dim) != theta.size()) {
    throw ContractError("controller output_dim " + std::to_string(config.output_dim) +
                        " does not match parameter count " + std::to_string(theta.size()));
  }
  const Tensor input = build_controller_input(base_output, theta, config.input);
  ad::Tape tape;
  const std::vector<ad::Var> vars =
      controller_param_leaves(tape, phi, config, /*requires_grad=*/false);
  ad::Var delta = controller_forward_tape(tape, input, vars, config);
  return delta_from_flat(theta, tape.value(delta));
}

ParamVector adapt(const ParamVector& theta, const ParamVector& delta) {
  if (!theta.same_layout(delta)) {
    throw ContractError("adapt: delta layout does not match parameter layout");
  }
  ParamVector out = theta;
  auto o = out.values();
  auto d = delta.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += d[i];
  return out;
}

ParamVector adapt_value(const GcnOutput& value_output, const ParamVector& theta,
                        const ParamVector& phi, const ControllerConfig& config) {
  const ParamVector delta = controller_forward(value_output, theta, phi, config);
  if (config.replace_params) return delta;
  return adapt(theta, delta);
}

AdaptationTask make_classify_task(int id, GridMaze maze) {
  AdaptationTask task;
  task.id = id;
  task.kind = TaskKind::Classify;
  const PathLabels labels = bfs_shortest_path(maze);
  task.targets = Tensor::zeros({labels.labels.size(), 1});
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    task.targets.data[i] = static_cast<double>(labels.labels[i]);
  }
  task.features = maze.features;
  task.a_hat = build_propagation_matrix(maze);
  task.maze = std::move(maze);
  return task;
}

AdaptationTask make_value_task(int id, int n, RewardMask mask) {
  AdaptationTask task;
  task.id = id;
  task.kind = TaskKind::Value;
  const ValueTable table = dp_value(n, mask);
  task.targets = Tensor::zeros({table.values.size(), 1});
  for (std::size_t i = 0; i < table.values.size(); ++i) task.targets.data[i] = table.values[i];
  task.features = value_features(n, mask);
  // The value task perturbs rewards only; the propagation graph is the full grid.
  const GridMaze grid = create_maze_graph(n, 0.0, 0, /*require_connected=*/false);
  task.a_hat = build_propagation_matrix(grid);
  task.mask = std::move(mask);
  return task;
}

AdaptationTask make_distance_task(int id, GridMaze maze, bool normalized_coords) {
  AdaptationTask task;
  task.id = id;
  task.kind = TaskKind::DistancePreserve;
  task.features = coordinate_features(maze, normalized_coords);
  task.a_hat = build_propagation_matrix(maze);
  task.dist_target = unit_mean_grid_distances(maze);
  task.maze = std::move(maze);
  return task;
}

namespace {

ad::Var task_loss(ad::Tape& tape, const AdaptationTask& task, const GcnTapeOutput& out) {
  switch (task.kind) {
    case TaskKind::Classify: return tape.bce_loss(out.y, task.targets);
    case TaskKind::Value: return tape.mse_loss(out.y, task.targets);
    case TaskKind::DistancePreserve: return tape.distance_loss(out.z, task.dist_target);
  }
  throw ContractError("task_loss: unknown task kind");
}

}  // namespace

ParamVector train_controller(std::span<const AdaptationTask> tasks, const ParamVector& theta,
                             const GcnConfig& gcn_config, const ControllerConfig& config,
                             const ControllerTrainHyper& hyper, std::uint64_t init_seed,
                             ControllerTrace* trace,
                             const std::function<std::vector<AdaptationTask>(int)>& resample) {
  if (tasks.empty()) throw ContractError("train_controller: empty task list");
  config.validate();
  if (static_cast<std::size_t>(config.output_dim) != theta.size()) {
    throw ContractError("train_controller: output_dim does not match theta size");
  }

  // theta is frozen, so each task's base output and controller input are
  // fixed for the whole run; precompute them.
  auto prepare_inputs = [&](std::span<const AdaptationTask> ts) {
    std::vector<Tensor> inputs;
    inputs.reserve(ts.size());
    for (const AdaptationTask& t : ts) {
      const GcnOutput base = gcn_forward(t.features, t.a_hat, theta, gcn_config);
      inputs.push_back(build_controller_input(base, theta, config.input));
    }
    return inputs;
  };

  std::vector<AdaptationTask> resampled;
  std::span<const AdaptationTask> current = tasks;
  std::vector<Tensor> inputs = prepare_inputs(current);
  const Tensor theta_flat = theta.flat();

  ParamVector phi = init_controller_params(config, init_seed);
  SgdOptimizer opt(hyper.lr, hyper.momentum);
  const std::size_t num_tasks = tasks.size();

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (resample && epoch > 0) {
      resampled = resample(epoch);
      if (resampled.size() != num_tasks) {
        throw ContractError("train_controller: resampler changed the task count");
      }
      current = resampled;
      inputs = prepare_inputs(current);
    }

    ParamVector grads = phi.zeros_like();
    double total = 0.0;
    std::vector<double> per_task;
    per_task.reserve(num_tasks);

    for (std::size_t t = 0; t < num_tasks; ++t) {
      ad::Tape tape;
      const std::vector<ad::Var> phi_vars =
          controller_param_leaves(tape, phi, config, /*requires_grad=*/true);
      ad::Var delta = controller_forward_tape(tape, inputs[t], phi_vars, config);
      ad::Var theta_prime;
      if (config.replace_params) {
        theta_prime = delta;
      } else {
        theta_prime = tape.add(tape.constant(theta_flat), delta);
      }
      const GcnVars gcn_vars = gcn_split_flat(tape, theta_prime, gcn_config);
      const GcnTapeOutput out =
          gcn_forward_tape(tape, current[t].features, current[t].a_hat, gcn_vars, gcn_config);
      ad::Var loss;
      try {
        loss = task_loss(tape, current[t], out);
      } catch (const NumericError& e) {
        throw TrainingError("controller training diverged at epoch " + std::to_string(epoch) +
                            ", task " + std::to_string(current[t].id) + " (" + e.what() +
                            "); try a smaller learning rate or delta_scale");
      }
      const double loss_value = tape.value(loss).data[0];
      if (!std::isfinite(loss_value)) {
        throw TrainingError("controller training loss is not finite at epoch " +
                            std::to_string(epoch));
      }
      per_task.push_back(loss_value);
      total += loss_value;
      tape.backward(loss);
      // Accumulate d(mean loss)/d(phi) in fixed task order.
      for (std::size_t s = 0; s < phi.num_segments(); ++s) {
        const Tensor g = tape.grad(phi_vars[s]);
        auto dst = grads.segment_values(phi.segment(s).name);
        for (std::size_t i = 0; i < dst.size(); ++i) {
          dst[i] += g.data[i] / static_cast<double>(num_tasks);
        }
      }
    }

    if (trace) {
      trace->total.push_back(total / static_cast<double>(num_tasks));
      trace->per_task.push_back(std::move(per_task));
    }
    opt.step(phi, grads);
  }
  return phi;
}

ParamVector adapt_for_task(const AdaptationTask& task, const ParamVector& theta,
                           const ParamVector& phi, const GcnConfig& gcn_config,
                           const ControllerConfig& config) {
  const GcnOutput base = gcn_forward(task.features, task.a_hat, theta, gcn_config);
  const ParamVector delta = controller_forward(base, theta, phi, config);
  if (config.replace_params) return delta;
  return adapt(theta, delta);
}

std::string controller_to_json(const ControllerConfig& config, const ParamVector& phi) {
  json j;
  j["schema"] = 1;
  j["model"] = "controller";
  j["config"] = {{"input", controller_input_name(config.input)},
                 {"hidden", config.hidden},
                 {"delta_scale", config.delta_scale},
                 {"replace_params", config.replace_params},
                 {"input_dim", config.input_dim},
                 {"output_dim", config.output_dim}};
  j["params"] = json::parse(phi.to_json());
  return j.dump(2) + "\n";
}

std::pair<ControllerConfig, ParamVector> controller_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("controller checkpoint: ") + e.what());
  }
  try {
    if (j.at("model").get<std::string>() != "controller") {
      throw ParseError("controller checkpoint: 'model' is not \"controller\"");
    }
    ControllerConfig config;
    const auto& c = j.at("config");
    config.input = controller_input_from_name(c.at("input").get<std::string>());
    config.hidden = c.at("hidden").get<std::vector<int>>();
    config.delta_scale = c.at("delta_scale").get<double>();
    config.replace_params = c.at("replace_params").get<bool>();
    config.input_dim = c.at("input_dim").get<int>();
    config.output_dim = c.at("output_dim").get<int>();
    config.validate();
    ParamVector phi = ParamVector::from_json(j.at("params").dump());
    return {config, std::move(phi)};
  } catch (const json::exception& e) {
    throw ParseError(std::string("controller checkpoint: ") + e.what());
  }
}

void save_controller(const ControllerConfig& config, const ParamVector& phi,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << controller_to_json(config, phi);
}

std::pair<ControllerConfig, ParamVector> load_controller(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return controller_from_json(buf.str());
}

}  // namespace mazeadapt
