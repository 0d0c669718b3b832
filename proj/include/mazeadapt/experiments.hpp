#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mazeadapt/controller.hpp"
#include "mazeadapt/gcn.hpp"
#include "mazeadapt/metrics.hpp"

namespace mazeadapt {

struct GcnHyperConfig {
  int hidden_dim = 16;
  double lr = 0.01;
  int epochs = 300;
  double momentum = 0.0;
};

struct CtrlHyperConfig {
  std::string input = "basic";  // "basic" | "enriched"
  std::vector<int> hidden{64, 64};
  double lr = 0.001;
  int epochs = 200;
  double momentum = 0.0;
  double delta_scale = 1.0;
  bool replace_params = false;
  bool resample_tasks = false;
};

struct Exp3Study {
  std::vector<int> train_sizes;
  std::vector<int> eval_sizes;
};

// Full description of one experiment run. Every field is echoed into the
// run report, so a run is reproducible from its report alone.
struct ExperimentConfig {
  int experiment = 1;
  int maze_size = 10;
  std::vector<double> task_block_probs{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> test_block_probs{0.1, 0.3, 0.5};
  int num_tasks = 10;
  int num_test_mazes = 3;
  double mask_q = 0.3;
  std::uint64_t maze_seed = 1;
  std::uint64_t init_seed = 2;
  std::uint64_t controller_seed = 3;
  bool require_connected = true;
  std::string maze_metric = "euclidean";  // "euclidean" | "manhattan"
  int gaussian_dim = 5;
  bool cross_size_normalize = true;
  std::vector<Exp3Study> exp3_studies{{{8}, {10, 12, 14}}, {{8, 10}, {12, 14}}};
  std::vector<double> exp3_ctrl_block_probs{0.1, 0.2, 0.3};
  GcnHyperConfig gcn;
  CtrlHyperConfig ctrl;
  std::string out_dir;

  void validate() const;
  nlohmann::json to_json() const;
  // Starts from defaults_for(experiment in j) and overlays the given fields;
  // unknown keys are a ParseError.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig defaults_for(int experiment);
};

MazeMetric maze_metric_from_name(std::string_view name);

// Runs one experiment and returns the RunReport. When out_dir is non-empty
// the report and its side artifacts (embeddings CSV, controller loss CSV)
// are also written there, and the report's "artifacts" section lists them.
nlohmann::json run_experiment(const ExperimentConfig& config, const std::string& out_dir = "");

// CSV writers shared with the CLI.
void write_embeddings_csv(const std::string& path, const GridMaze& maze, const Tensor& latent);
void write_controller_loss_csv(const std::string& path, const ControllerTrace& trace);
void write_labels_csv(const std::string& path, const PathLabels& labels);
void write_values_csv(const std::string& path, const ValueTable& values);

// Seed scheme shared by experiments: training task i, held-out instance j
// and Gaussian feature draws live in disjoint seed blocks.
std::uint64_t task_seed(std::uint64_t maze_seed, int index);
std::uint64_t heldout_seed(std::uint64_t maze_seed, int index);
std::uint64_t gaussian_seed(std::uint64_t maze_seed, int index);
std::uint64_t resample_seed(std::uint64_t maze_seed, int epoch, int index);

}  // namespace mazeadapt
