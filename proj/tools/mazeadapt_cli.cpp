// Command-line surface: maze generation, training, evaluation and the
// packaged experiments. Exit codes: 0 success, 1 usage error, 2 runtime
// failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mazeadapt/controller.hpp"
#include "mazeadapt/error.hpp"
#include "mazeadapt/experiments.hpp"
#include "mazeadapt/gcn.hpp"
#include "mazeadapt/maze.hpp"
#include "mazeadapt/metrics.hpp"
#include "mazeadapt/oracle.hpp"

namespace ma = mazeadapt;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ma::Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ma::Error("cannot open '" + path + "' for writing");
  out << text;
}

struct GenMazeArgs {
  int size = 10;
  double block_prob = 0.0;
  std::uint64_t seed = 0;
  bool no_require_connected = false;
  int gaussian_dim = 0;  // 0 = keep spatial features
  std::string out;
};

int run_gen_maze(const GenMazeArgs& a) {
  ma::GridMaze maze =
      ma::create_maze_graph(a.size, a.block_prob, a.seed, !a.no_require_connected);
  if (a.gaussian_dim > 0) {
    maze = ma::randomize_features(maze, a.gaussian_dim, a.seed);
  }
  const std::string text = ma::maze_to_json(maze);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
  return 0;
}

struct TrainGcnArgs {
  std::string mode = "classify";
  std::vector<std::string> maze_paths;
  int value_size = 10;
  double mask_q = 0.0;
  std::uint64_t mask_seed = 0;
  int hidden = 16;
  double lr = 0.01;
  int epochs = 300;
  double momentum = 0.0;
  std::uint64_t init_seed = 0;
  bool raw_coords = false;
  std::string out;
  std::string trace_path;
};

int run_train_gcn(const TrainGcnArgs& a) {
  ma::TrainTrace trace;
  ma::TrainHyper hyper{a.lr, a.epochs, a.momentum};
  ma::GcnConfig config;
  ma::ParamVector params;
  if (a.mode == "classify") {
    if (a.maze_paths.size() != 1) throw ma::ContractError("classify mode needs exactly one --maze");
    const ma::GridMaze maze = ma::load_maze(a.maze_paths.front());
    config = ma::GcnConfig{static_cast<int>(maze.features.cols()), a.hidden, 1,
                           ma::GcnMode::Classify};
    params = ma::train_first_order(maze, ma::bfs_shortest_path(maze), config, hyper, a.init_seed,
                                   &trace);
  } else if (a.mode == "value") {
    const ma::RewardMask mask = ma::sample_reward_mask(a.value_size, a.mask_q, a.mask_seed);
    config = ma::GcnConfig{3, a.hidden, 1, ma::GcnMode::Regress};
    params = ma::train_value_regressor(a.value_size, mask, ma::dp_value(a.value_size, mask),
                                       config, hyper, a.init_seed, &trace);
  } else if (a.mode == "distpreserve") {
    if (a.maze_paths.empty()) throw ma::ContractError("distpreserve mode needs --maze");
    std::vector<ma::GridMaze> mazes;
    for (const auto& p : a.maze_paths) mazes.push_back(ma::load_maze(p));
    config = ma::GcnConfig{2, a.hidden, 1, ma::GcnMode::DistancePreserve};
    params = ma::train_distance_preserving(mazes, config, hyper, a.init_seed, !a.raw_coords,
                                           &trace);
  } else {
    throw ma::ContractError("unknown --mode '" + a.mode + "'");
  }
  ma::save_gcn(config, params, a.out);
  if (!a.trace_path.empty()) {
    std::ofstream out(a.trace_path);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < trace.loss.size(); ++e) out << e << ',' << trace.loss[e] << '\n';
  }
  std::cout << "wrote " << a.out << " (final loss "
            << (trace.loss.empty() ? 0.0 : trace.loss.back()) << ")\n";
  return 0;
}

struct TrainControllerArgs {
  std::string gcn_path;
  std::string kind = "classify";
  int size = 10;
  int num_tasks = 10;
  std::uint64_t task_seed = 1;
  std::vector<double> block_probs{0.1, 0.2, 0.3, 0.4, 0.5};
  double mask_q = 0.3;
  std::string input = "basic";
  std::vector<int> hidden{64, 64};
  double lr = 0.001;
  int epochs = 200;
  double momentum = 0.0;
  double delta_scale = 1.0;
  bool replace_params = false;
  bool raw_coords = false;
  std::uint64_t init_seed = 0;
  std::string out;
  std::string trace_path;
};

int run_train_controller(const TrainControllerArgs& a) {
  const auto [gcn_config, theta] = ma::load_gcn(a.gcn_path);
  std::vector<ma::AdaptationTask> tasks;
  for (int i = 0; i < a.num_tasks; ++i) {
    const std::uint64_t seed = ma::task_seed(a.task_seed, i);
    const double p = a.block_probs[static_cast<std::size_t>(i) % a.block_probs.size()];
    if (a.kind == "classify") {
      tasks.push_back(ma::make_classify_task(i, ma::create_maze_graph(a.size, p, seed)));
    } else if (a.kind == "value") {
      tasks.push_back(ma::make_value_task(i, a.size, ma::sample_reward_mask(a.size, a.mask_q, seed)));
    } else if (a.kind == "distpreserve") {
      tasks.push_back(
          ma::make_distance_task(i, ma::create_maze_graph(a.size, p, seed), !a.raw_coords));
    } else {
      throw ma::ContractError("unknown --kind '" + a.kind + "'");
    }
  }
  ma::ControllerConfig config;
  config.input = ma::controller_input_from_name(a.input);
  config.hidden = a.hidden;
  config.delta_scale = a.delta_scale;
  config.replace_params = a.replace_params;
  config.input_dim = ma::controller_input_dim(config.input, gcn_config, a.size * a.size);
  config.output_dim = gcn_config.num_params();
  ma::ControllerTrace trace;
  const ma::ControllerTrainHyper hyper{a.lr, a.epochs, a.momentum};
  const ma::ParamVector phi =
      ma::train_controller(tasks, theta, gcn_config, config, hyper, a.init_seed, &trace);
  ma::save_controller(config, phi, a.out);
  if (!a.trace_path.empty()) ma::write_controller_loss_csv(a.trace_path, trace);
  std::cout << "wrote " << a.out << " (final loss "
            << (trace.total.empty() ? 0.0 : trace.total.back()) << ")\n";
  return 0;
}

struct EvalArgs {
  std::string gcn_path;
  std::string controller_path;
  std::string maze_path;
  int value_size = 0;
  double mask_q = 0.3;
  std::uint64_t mask_seed = 0;
  std::string report_path;
  std::string export_oracle;
  std::string export_embeddings;
};

int run_eval(const EvalArgs& a) {
  const auto [gcn_config, theta] = ma::load_gcn(a.gcn_path);

  ma::AdaptationTask task;
  std::optional<ma::ValueTable> value_table;
  if (!a.maze_path.empty()) {
    ma::GridMaze maze = ma::load_maze(a.maze_path);
    if (gcn_config.mode == ma::GcnMode::DistancePreserve) {
      task = ma::make_distance_task(0, std::move(maze), true);
    } else {
      task = ma::make_classify_task(0, std::move(maze));
    }
  } else if (a.value_size > 0) {
    const ma::RewardMask mask = ma::sample_reward_mask(a.value_size, a.mask_q, a.mask_seed);
    value_table = ma::dp_value(a.value_size, mask);
    task = ma::make_value_task(0, a.value_size, mask);
  } else {
    throw ma::ContractError("eval needs either --maze or --value-size");
  }

  auto metrics_for = [&](const ma::ParamVector& params) {
    const ma::GcnOutput out = ma::gcn_forward(task.features, task.a_hat, params, gcn_config);
    json m;
    if (task.kind == ma::TaskKind::Classify) {
      std::vector<int> labels(task.targets.data.size());
      for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = task.targets.data[i] > 0.5;
      const ma::ClassificationReport r = ma::bce_and_accuracy(out.y.data, labels);
      m["bce"] = r.bce;
      m["accuracy"] = r.accuracy;
    } else if (task.kind == ma::TaskKind::Value) {
      const ma::RegressionReport r = ma::regression_report(out.y.data, value_table->values);
      m["mse"] = r.mse;
      m["mae"] = r.mae;
      m["r2"] = r.r2;
      m["policy_accuracy"] = ma::policy_accuracy(out.y.data, ma::optimal_policy(*value_table));
    }
    if (task.kind != ma::TaskKind::Value) {
      std::vector<std::pair<double, double>> coords;
      for (int v = 0; v < task.maze.num_nodes(); ++v) {
        const auto [x, y] = task.maze.coords(v);
        coords.emplace_back(x, y);
      }
      const ma::IsomorphismReport iso = ma::distance_correlations(out.z, coords);
      m["pearson"] = iso.pearson;
      m["spearman"] = iso.spearman;
    }
    return m;
  };

  json report;
  report["unadapted"] = metrics_for(theta);
  if (!a.controller_path.empty()) {
    const auto [ctrl_config, phi] = ma::load_controller(a.controller_path);
    const ma::ParamVector theta_prime =
        ma::adapt_for_task(task, theta, phi, gcn_config, ctrl_config);
    report["adapted"] = metrics_for(theta_prime);
  }

  if (!a.export_oracle.empty()) {
    if (task.kind == ma::TaskKind::Value) {
      ma::write_values_csv(a.export_oracle, *value_table);
    } else {
      ma::write_labels_csv(a.export_oracle, ma::bfs_shortest_path(task.maze));
    }
  }
  if (!a.export_embeddings.empty()) {
    const ma::GcnOutput out = ma::gcn_forward(task.features, task.a_hat, theta, gcn_config);
    ma::GridMaze grid = task.maze;
    if (task.kind == ma::TaskKind::Value) {
      grid = ma::create_maze_graph(a.value_size, 0.0, 0, false);
    }
    ma::write_embeddings_csv(a.export_embeddings, grid, out.z);
  }

  const std::string text = report.dump(2) + "\n";
  if (a.report_path.empty()) {
    std::cout << text;
  } else {
    write_file(a.report_path, text);
  }
  return 0;
}

struct ExpArgs {
  int id = 1;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> num_tasks;
  std::optional<int> num_test_mazes;
  std::optional<int> maze_size;
  std::optional<int> gcn_epochs;
  std::optional<int> ctrl_epochs;
  std::string out_dir;
};

int run_exp(const ExpArgs& a) {
  ma::ExperimentConfig cfg;
  if (!a.config_path.empty()) {
    json j;
    try {
      j = json::parse(read_file(a.config_path));
    } catch (const json::parse_error& e) {
      throw ma::ParseError(std::string("config file: ") + e.what());
    }
    j["experiment"] = a.id;  // subcommand flag wins
    cfg = ma::ExperimentConfig::from_json(j);
  } else {
    cfg = ma::ExperimentConfig::defaults_for(a.id);
  }
  if (a.seed) {
    cfg.maze_seed = *a.seed;
    cfg.init_seed = *a.seed + 1;
    cfg.controller_seed = *a.seed + 2;
  }
  if (a.num_tasks) cfg.num_tasks = *a.num_tasks;
  if (a.num_test_mazes) cfg.num_test_mazes = *a.num_test_mazes;
  if (a.maze_size) cfg.maze_size = *a.maze_size;
  if (a.gcn_epochs) cfg.gcn.epochs = *a.gcn_epochs;
  if (a.ctrl_epochs) cfg.ctrl.epochs = *a.ctrl_epochs;
  cfg.out_dir = a.out_dir;

  const json report = ma::run_experiment(cfg, a.out_dir);
  if (a.out_dir.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::cout << "wrote " << a.out_dir << "/report.json\n";
  }
  return 0;
}

struct ExportEmbeddingsArgs {
  std::string gcn_path;
  std::string maze_path;
  std::string out;
};

int run_export_embeddings(const ExportEmbeddingsArgs& a) {
  const auto [gcn_config, params] = ma::load_gcn(a.gcn_path);
  const ma::GridMaze maze = ma::load_maze(a.maze_path);
  const ma::Tensor features = gcn_config.mode == ma::GcnMode::DistancePreserve
                                  ? ma::coordinate_features(maze, true)
                                  : maze.features;
  const ma::GcnOutput out =
      ma::gcn_forward(features, ma::build_propagation_matrix(maze), params, gcn_config);
  ma::write_embeddings_csv(a.out, maze, out.z);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mazeadapt: hierarchical maze learning (GCN + MLP hypernetwork controller)"};
  app.require_subcommand(1);

  GenMazeArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-maze", "Generate a grid maze as JSON");
  gen_cmd->add_option("--size", gen.size, "Nodes per side")->check(CLI::Range(2, 1000));
  gen_cmd->add_option("--block-prob", gen.block_prob, "Edge removal probability")
      ->check(CLI::Range(0.0, 0.999));
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_flag("--no-require-connected", gen.no_require_connected,
                    "Allow start/goal to be disconnected");
  gen_cmd->add_option("--gaussian-dim", gen.gaussian_dim,
                      "Replace features with d-dimensional Gaussian noise");
  gen_cmd->add_option("--out", gen.out, "Output path (stdout when omitted)");

  TrainGcnArgs tg;
  auto* tg_cmd = app.add_subcommand("train-gcn", "Train the first-order GCN");
  tg_cmd->add_option("--mode", tg.mode, "classify | value | distpreserve");
  tg_cmd->add_option("--maze", tg.maze_paths, "Maze JSON (repeatable for distpreserve)");
  tg_cmd->add_option("--value-size", tg.value_size, "Grid side for value mode");
  tg_cmd->add_option("--mask-q", tg.mask_q, "Reward mask flip probability (value mode)");
  tg_cmd->add_option("--mask-seed", tg.mask_seed, "Reward mask seed (value mode)");
  tg_cmd->add_option("--hidden", tg.hidden, "Hidden width");
  tg_cmd->add_option("--lr", tg.lr, "Learning rate");
  tg_cmd->add_option("--epochs", tg.epochs, "Training epochs");
  tg_cmd->add_option("--momentum", tg.momentum, "SGD momentum");
  tg_cmd->add_option("--init-seed", tg.init_seed, "Weight init seed");
  tg_cmd->add_flag("--raw-coords", tg.raw_coords,
                   "Skip coordinate normalization (distpreserve mode)");
  tg_cmd->add_option("--out", tg.out, "Checkpoint output path")->required();
  tg_cmd->add_option("--trace", tg.trace_path, "Write per-epoch loss CSV");

  TrainControllerArgs tc;
  auto* tc_cmd = app.add_subcommand("train-controller", "Train the MLP hypernetwork controller");
  tc_cmd->add_option("--gcn", tc.gcn_path, "Base GCN checkpoint")->required();
  tc_cmd->add_option("--kind", tc.kind, "classify | value | distpreserve");
  tc_cmd->add_option("--size", tc.size, "Task maze side length");
  tc_cmd->add_option("--num-tasks", tc.num_tasks, "Number of adaptation tasks");
  tc_cmd->add_option("--task-seed", tc.task_seed, "Base seed for task generation");
  tc_cmd->add_option("--block-probs", tc.block_probs, "Cycled task block probabilities");
  tc_cmd->add_option("--mask-q", tc.mask_q, "Reward mask flip probability (value kind)");
  tc_cmd->add_option("--input", tc.input, "basic | enriched");
  tc_cmd->add_option("--hidden", tc.hidden, "Controller hidden widths");
  tc_cmd->add_option("--lr", tc.lr, "Learning rate");
  tc_cmd->add_option("--epochs", tc.epochs, "Training epochs");
  tc_cmd->add_option("--momentum", tc.momentum, "SGD momentum");
  tc_cmd->add_option("--delta-scale", tc.delta_scale, "Scale applied to the emitted delta");
  tc_cmd->add_flag("--replace-params", tc.replace_params,
                   "Replace parameters with the delta instead of adding it");
  tc_cmd->add_flag("--raw-coords", tc.raw_coords, "Raw coordinates for distpreserve tasks");
  tc_cmd->add_option("--seed", tc.init_seed, "Controller init seed");
  tc_cmd->add_option("--out", tc.out, "Checkpoint output path")->required();
  tc_cmd->add_option("--trace", tc.trace_path, "Write loss trace CSV");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a GCN (optionally adapted) on one task");
  ev_cmd->add_option("--gcn", ev.gcn_path, "GCN checkpoint")->required();
  ev_cmd->add_option("--controller", ev.controller_path, "Controller checkpoint");
  ev_cmd->add_option("--maze", ev.maze_path, "Maze JSON task");
  ev_cmd->add_option("--value-size", ev.value_size, "Value task grid side");
  ev_cmd->add_option("--mask-q", ev.mask_q, "Value task mask flip probability");
  ev_cmd->add_option("--mask-seed", ev.mask_seed, "Value task mask seed");
  ev_cmd->add_option("--report", ev.report_path, "Metric report path (stdout when omitted)");
  ev_cmd->add_option("--export-oracle", ev.export_oracle, "Write oracle labels/values CSV");
  ev_cmd->add_option("--export-embeddings", ev.export_embeddings, "Write latent embeddings CSV");

  ExpArgs ex;
  auto* ex_cmd = app.add_subcommand("exp", "Run a packaged experiment (1-5)");
  ex_cmd->add_option("--id", ex.id, "Experiment id")->required()->check(CLI::Range(1, 5));
  ex_cmd->add_option("--config", ex.config_path, "Config JSON (flags override file values)");
  ex_cmd->add_option("--seed", ex.seed, "Base seed (maze/init/controller = seed, +1, +2)");
  ex_cmd->add_option("--num-tasks", ex.num_tasks, "Adaptation task count");
  ex_cmd->add_option("--num-test-mazes", ex.num_test_mazes, "Held-out instance count");
  ex_cmd->add_option("--maze-size", ex.maze_size, "Grid side length");
  ex_cmd->add_option("--gcn-epochs", ex.gcn_epochs, "GCN training epochs");
  ex_cmd->add_option("--ctrl-epochs", ex.ctrl_epochs, "Controller training epochs");
  ex_cmd->add_option("--out", ex.out_dir, "Output directory for report + artifacts");

  ExportEmbeddingsArgs ee;
  auto* ee_cmd = app.add_subcommand("export-embeddings", "Write latent embeddings to CSV");
  ee_cmd->add_option("--gcn", ee.gcn_path, "GCN checkpoint")->required();
  ee_cmd->add_option("--maze", ee.maze_path, "Maze JSON")->required();
  ee_cmd->add_option("--out", ee.out, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << '\n' << app.help();
    return 1;
  }

  try {
    if (*gen_cmd) return run_gen_maze(gen);
    if (*tg_cmd) return run_train_gcn(tg);
    if (*tc_cmd) return run_train_controller(tc);
    if (*ev_cmd) return run_eval(ev);
    if (*ex_cmd) return run_exp(ex);
    if (*ee_cmd) return run_export_embeddings(ee);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
