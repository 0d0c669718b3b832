#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mazeadapt/gcn.hpp"
#include "mazeadapt/maze.hpp"
#include "mazeadapt/oracle.hpp"
#include "mazeadapt/param_vector.hpp"

namespace mazeadapt {

enum class ControllerInput { Basic, Enriched };

const char* controller_input_name(ControllerInput input);
ControllerInput controller_input_from_name(std::string_view name);

// MLP hypernetwork emitting a parameter delta for the GCN. Basic input is
// flatten(Y) ++ flatten(theta); Enriched prepends flatten(Z), the layer-1
// latent, giving hidden_dim * num_nodes extra coordinates.
struct ControllerConfig {
  ControllerInput input = ControllerInput::Basic;
  std::vector<int> hidden{64, 64};
  double delta_scale = 1.0;
  // Algorithm variant that replaces the parameters with the delta instead of
  // adding it; off by default (the additive form keeps the zero-controller
  // identity).
  bool replace_params = false;
  int input_dim = 0;   // derived for a concrete GCN + maze size
  int output_dim = 0;  // = number of GCN parameters

  void validate() const;
};

int controller_input_dim(ControllerInput input, const GcnConfig& gcn, int num_nodes);

// Hidden layers start with the same fan-based uniform init as the GCN; the
// output layer starts at zero so training begins exactly at the unadapted
// baseline.
ParamVector init_controller_params(const ControllerConfig& config, std::uint64_t seed);

// Concatenated controller input for one task, shape {1, input_dim}.
Tensor build_controller_input(const GcnOutput& base, const ParamVector& theta,
                              ControllerInput input);

// Plain forward: delta = delta_scale * MLP(input), in theta's layout.
ParamVector controller_forward(const GcnOutput& base_output, const ParamVector& theta,
                               const ParamVector& phi, const ControllerConfig& config);

// Same MLP recorded on a tape; input is a constant, phi_vars are the
// parameter leaves in layer order w0, b0, w1, b1, ...
ad::Var controller_forward_tape(ad::Tape& tape, const Tensor& input,
                                std::span<const ad::Var> phi_vars,
                                const ControllerConfig& config);

// theta' = theta + delta, elementwise; neither input is mutated.
ParamVector adapt(const ParamVector& theta, const ParamVector& delta);

// Value-task adaptation: Basic input built from the predicted values.
ParamVector adapt_value(const GcnOutput& value_output, const ParamVector& theta,
                        const ParamVector& phi, const ControllerConfig& config);

enum class TaskKind { Classify, Value, DistancePreserve };

// One perturbed environment with its oracle targets and the cached model
// inputs the controller pipeline needs.
struct AdaptationTask {
  int id = 0;
  TaskKind kind = TaskKind::Classify;
  Tensor features;
  Tensor a_hat;
  Tensor targets;      // labels or values, num_nodes x 1 (empty for DistancePreserve)
  Tensor dist_target;  // unit-mean grid distances (DistancePreserve only)
  GridMaze maze;       // provenance for Classify / DistancePreserve tasks
  RewardMask mask;     // provenance for Value tasks
};

AdaptationTask make_classify_task(int id, GridMaze maze);
AdaptationTask make_value_task(int id, int n, RewardMask mask);
AdaptationTask make_distance_task(int id, GridMaze maze, bool normalized_coords);

struct ControllerTrainHyper {
  double lr = 0.001;
  int epochs = 200;
  double momentum = 0.0;
};

struct ControllerTrace {
  std::vector<double> total;                 // mean task loss per epoch
  std::vector<std::vector<double>> per_task; // per-epoch task losses
};

// Trains phi by descending the mean adapted-prediction loss over the task
// set; theta stays frozen and gradients flow only into phi. When `resample`
// is set, a fresh task set is drawn each epoch (same size as `tasks`).
ParamVector train_controller(
    std::span<const AdaptationTask> tasks, const ParamVector& theta, const GcnConfig& gcn_config,
    const ControllerConfig& config, const ControllerTrainHyper& hyper, std::uint64_t init_seed,
    ControllerTrace* trace = nullptr,
    const std::function<std::vector<AdaptationTask>(int epoch)>& resample = nullptr);

// Adapted parameters for one task: base forward, controller delta, adapt.
ParamVector adapt_for_task(const AdaptationTask& task, const ParamVector& theta,
                           const ParamVector& phi, const GcnConfig& gcn_config,
                           const ControllerConfig& config);

std::string controller_to_json(const ControllerConfig& config, const ParamVector& phi);
std::pair<ControllerConfig, ParamVector> controller_from_json(std::string_view text);
void save_controller(const ControllerConfig& config, const ParamVector& phi,
                     const std::string& path);
std::pair<ControllerConfig, ParamVector> load_controller(const std::string& path);

}  // namespace mazeadapt
