#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mazeadapt/maze.hpp"
#include "mazeadapt/oracle.hpp"
#include "mazeadapt/param_vector.hpp"
#include "mazeadapt/tape.hpp"

namespace mazeadapt {

enum class GcnMode { Classify, Regress, DistancePreserve };

const char* gcn_mode_name(GcnMode mode);
GcnMode gcn_mode_from_name(std::string_view name);

struct GcnConfig {
  int input_dim = 5;
  int hidden_dim = 16;
  int output_dim = 1;
  GcnMode mode = GcnMode::Classify;

  void validate() const;
  int num_params() const;
};

// Symmetric-normalized propagation matrix with self-loops over the active
// edges: D~^(-1/2) (A + I) D~^(-1/2), dense, indexed by node id.
Tensor build_propagation_matrix(const GridMaze& maze);

// Parameter layout: w1 [in x hidden], b1 [hidden], w2 [hidden x out],
// b2 [out]. Weights start uniform in +-sqrt(6 / (fan_in + fan_out)),
// biases at zero.
ParamVector init_gcn_params(const GcnConfig& config, std::uint64_t seed);

struct GcnOutput {
  Tensor y;  // num_nodes x output_dim; sigmoid-squashed in Classify mode
  Tensor z;  // num_nodes x hidden_dim, layer-1 latent after ReLU
};

// Pure two-layer forward: Z = ReLU(A X W1 + b1), logits = A Z W2 + b2.
GcnOutput gcn_forward(const Tensor& features, const Tensor& a_hat, const ParamVector& params,
                      const GcnConfig& config);

// Tape building blocks, shared by base training (parameters as leaves) and
// the controller path (parameters sliced from an adapted flat vector).
struct GcnVars {
  ad::Var w1, b1, w2, b2;
};

GcnVars gcn_param_leaves(ad::Tape& tape, const ParamVector& params, bool requires_grad);
GcnVars gcn_split_flat(ad::Tape& tape, ad::Var theta_flat, const GcnConfig& config);

struct GcnTapeOutput {
  ad::Var y, z;
};

GcnTapeOutput gcn_forward_tape(ad::Tape& tape, const Tensor& features, const Tensor& a_hat,
                               const GcnVars& vars, const GcnConfig& config);

struct TrainHyper {
  double lr = 0.01;
  int epochs = 300;
  double momentum = 0.0;
};

struct TrainTrace {
  std::vector<double> loss;  // one entry per epoch, before the update
};

// Full-batch gradient descent on BCE against shortest-path labels.
ParamVector train_first_order(const GridMaze& maze, const PathLabels& labels,
                              const GcnConfig& config, const TrainHyper& hyper,
                              std::uint64_t init_seed, TrainTrace* trace = nullptr);

// Node features for the value task on the full n x n grid:
// [x, y, mask(x,y) * (x+y)] -- coordinates plus the observed reward.
Tensor value_features(int n, const RewardMask& mask);

// Full-batch MSE descent against DP value targets.
ParamVector train_value_regressor(int n, const RewardMask& mask, const ValueTable& values,
                                  const GcnConfig& config, const TrainHyper& hyper,
                                  std::uint64_t init_seed, TrainTrace* trace = nullptr);

// Unit-mean-normalized pairwise Euclidean distances between node coordinates,
// upper triangle in (i,j), i<j row-major order.
Tensor unit_mean_grid_distances(const GridMaze& maze);

// Minimizes the summed distance_loss over the training mazes so that latent
// geometry preserves grid geometry; coordinate features, optionally divided
// by (n-1) so the weights transfer across maze sizes.
ParamVector train_distance_preserving(std::span<const GridMaze> mazes, const GcnConfig& config,
                                      const TrainHyper& hyper, std::uint64_t init_seed,
                                      bool normalized_coords = true, TrainTrace* trace = nullptr);

// Checkpoint = config envelope + ParamVector payload.
std::string gcn_to_json(const GcnConfig& config, const ParamVector& params);
std::pair<GcnConfig, ParamVector> gcn_from_json(std::string_view text);
void save_gcn(const GcnConfig& config, const ParamVector& params, const std::string& path);
std::pair<GcnConfig, ParamVector> load_gcn(const std::string& path);

}  // namespace mazeadapt
