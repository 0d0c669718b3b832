#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mazeadapt/oracle.hpp"
#include "mazeadapt/tensor.hpp"

namespace mazeadapt {

struct ClassificationReport {
  double bce = 0.0;
  double accuracy = 0.0;  // threshold 0.5, prediction > 0.5 counts as class 1
};

// Predictions are probabilities; they are clamped like the training loss
// before the logs.
ClassificationReport bce_and_accuracy(std::span<const double> predictions,
                                      std::span<const int> labels);

struct RegressionReport {
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
};

RegressionReport regression_report(std::span<const double> predictions,
                                   std::span<const double> targets);

// Fraction of nodes with at least one Down/Right successor whose greedy
// action under the predicted values matches the oracle policy.
double policy_accuracy(std::span<const double> predicted_values, const PolicyTable& oracle);

double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);  // midranks for ties

enum class MazeMetric { Euclidean, Manhattan };

struct IsomorphismReport {
  double pearson = 0.0;
  double spearman = 0.0;
  std::size_t num_pairs = 0;
};

// Correlates upper-triangle pairwise Euclidean distances between latent rows
// with pairwise distances between the matching (x, y) coordinates, both
// flattened in identical (i,j), i<j row-major order.
IsomorphismReport distance_correlations(const Tensor& latent,
                                        std::span<const std::pair<double, double>> coords,
                                        MazeMetric metric = MazeMetric::Euclidean);

struct KmeansResult {
  std::vector<int> assignment;
  Tensor centroids;  // k x dim
  double inertia = 0.0;
};

// Seeded k-means++ initialization, then Lloyd iterations until the
// assignment reaches a fixpoint or max_iters passes.
KmeansResult kmeans(const Tensor& points, int k, std::uint64_t seed, int max_iters = 100);

struct Projection2D {
  Tensor points;  // N x 2
  bool degenerate = false;  // rank < 2: second axis all zero
};

// Centered projection onto the top-2 principal directions (power iteration
// with deflation). A cheap stand-in for nonlinear embeddings when eyeballing
// latent spaces.
Projection2D linear_projection_2d(const Tensor& embeddings);

}  // namespace mazeadapt
