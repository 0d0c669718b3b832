#include "mazeadapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mazeadapt/error.hpp"
#include "mazeadapt/rng.hpp"
#include "mazeadapt/tape.hpp"

namespace mazeadapt {

ClassificationReport bce_and_accuracy(std::span<const double> predictions,
                                      std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ContractError("bce_and_accuracy: prediction and label counts differ");
  }
  if (predictions.empty()) throw ContractError("bce_and_accuracy: empty inputs");
  const double lo = ad::Tape::kBceClamp, hi = 1.0 - ad::Tape::kBceClamp;
  double bce = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], lo, hi);
    const double t = static_cast<double>(labels[i]);
    bce += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    const int predicted = predictions[i] > 0.5 ? 1 : 0;
    if (predicted == labels[i]) ++correct;
  }
  return {bce / static_cast<double>(predictions.size()),
          static_cast<double>(correct) / static_cast<double>(predictions.size())};
}

RegressionReport regression_report(std::span<const double> predictions,
                                   std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw ContractError("regression_report: prediction and target counts differ");
  }
  if (predictions.size() < 2) throw ContractError("regression_report: need at least 2 points");
  const double n = static_cast<double>(predictions.size());
  double mse = 0.0, mae = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) mean += targets[i];
  mean /= n;
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = predictions[i] - targets[i];
    mse += d * d;
    mae += std::abs(d);
    sse += d * d;
    const double c = targets[i] - mean;
    sst += c * c;
  }
  if (sst == 0.0) {
    throw ContractError("regression_report: target variance is zero, r2 undefined");
  }
  return {mse / n, mae / n, 1.0 - sse / sst};
}

double policy_accuracy(std::span<const double> predicted_values, const PolicyTable& oracle) {
  const int n = oracle.n;
  if (predicted_values.size() != oracle.actions.size()) {
    throw ContractError("policy_accuracy: value count does not match policy grid");
  }
  const PolicyTable predicted = greedy_policy(n, predicted_values);
  std::size_t considered = 0, matches = 0;
  for (std::size_t i = 0; i < oracle.actions.size(); ++i) {
    if (oracle.actions[i] == Action::Terminal) continue;
    ++considered;
    if (predicted.actions[i] == oracle.actions[i]) ++matches;
  }
  if (considered == 0) throw ContractError("policy_accuracy: no non-terminal nodes");
  return static_cast<double>(matches) / static_cast<double>(considered);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("pearson: length mismatch");
  if (a.size() < 2) throw ContractError("pearson: need at least 2 points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) {
    throw ContractError("pearson: zero-variance input, correlation undefined");
  }
  return cov / std::sqrt(va * vb);
}

namespace {

// Midranks: ties share the average of the ranks they occupy.
std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("spearman: length mismatch");
  const std::vector<double> ra = midranks(a);
  const std::vector<double> rb = midranks(b);
  return pearson(ra, rb);
}

IsomorphismReport distance_correlations(const Tensor& latent,
                                        std::span<const std::pair<double, double>> coords,
                                        MazeMetric metric) {
  if (!latent.is_matrix()) {
    throw ContractError("distance_correlations: latent must be a matrix, got " +
                        latent.shape_str());
  }
  const std::size_t n = latent.rows();
  if (n != coords.size()) {
    throw ContractError("distance_correlations: latent rows and coordinate count differ");
  }
  if (n < 3) throw ContractError("distance_correlations: need at least 3 nodes");
  const std::size_t pairs = n * (n - 1) / 2;
  std::vector<double> d_latent(pairs), d_maze(pairs);
  const std::size_t h = latent.cols();
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      double sq = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        const double d = latent.at(i, k) - latent.at(j, k);
        sq += d * d;
      }
      d_latent[p] = std::sqrt(sq);
      const double dx = coords[i].first - coords[j].first;
      const double dy = coords[i].second - coords[j].second;
      d_maze[p] = metric == MazeMetric::Euclidean ? std::sqrt(dx * dx + dy * dy)
                                                  : std::abs(dx) + std::abs(dy);
    }
  }
  IsomorphismReport report;
  report.num_pairs = pairs;
  report.pearson = pearson(d_latent, d_maze);
  report.spearman = spearman(d_latent, d_maze);
  return report;
}

namespace {

double sq_dist(const Tensor& points, std::size_t row, std::span<const double> center) {
  double sq = 0.0;
  for (std::size_t k = 0; k < center.size(); ++k) {
    const double d = points.at(row, k) - center[k];
    sq += d * d;
  }
  return sq;
}

}  // namespace

KmeansResult kmeans(const Tensor& points, int k, std::uint64_t seed, int max_iters) {
  if (!points.is_matrix()) throw ContractError("kmeans: points must be a matrix");
  const std::size_t n = points.rows(), dim = points.cols();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw ContractError("kmeans: k must lie in [1, num_points]");
  }
  const std::size_t kk = static_cast<std::size_t>(k);
  Rng rng(seed);

  // k-means++ seeding
  Tensor centroids = Tensor::zeros({kk, dim});
  std::vector<double> best_sq(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < kk; ++c) {
    std::size_t chosen = first;
    if (c > 0) {
      double total = 0.0;
      for (double d : best_sq) total += d;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += best_sq[i];
          if (acc >= target) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = static_cast<std::size_t>(rng.below(n));  // all points coincide
      }
    }
    for (std::size_t d = 0; d < dim; ++d) centroids.at(c, d) = points.at(chosen, d);
    for (std::size_t i = 0; i < n; ++i) {
      best_sq[i] = std::min(best_sq[i],
                            sq_dist(points, i, {centroids.data.data() + c * dim, dim}));
    }
  }

  std::vector<int> assignment(n, -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kk; ++c) {
        const double d = sq_dist(points, i, {centroids.data.data() + c * dim, dim});
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Tensor sums = Tensor::zeros({kk, dim});
    std::vector<std::size_t> counts(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums.at(c, d) += points.at(i, d);
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const auto ci = static_cast<std::size_t>(assignment[i]);
          const double d = sq_dist(points, i, {centroids.data.data() + ci * dim, dim});
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        for (std::size_t d = 0; d < dim; ++d) centroids.at(c, d) = points.at(far, d);
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d) {
        centroids.at(c, d) = sums.at(c, d) / static_cast<double>(counts[c]);
      }
    }
  }

  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(assignment[i]);
    inertia += sq_dist(points, i, {centroids.data.data() + c * dim, dim});
  }
  return {std::move(assignment), std::move(centroids), inertia};
}

namespace {

// Leading eigenvector of a symmetric matrix by power iteration.
std::vector<double> power_iteration(const Tensor& sym, int iters) {
  const std::size_t n = sym.rows();
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> next(n);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += sym.at(i, j) * v[j];
      next[i] = acc;
    }
    double norm = 0.0;
    for (double x : next) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return std::vector<double>(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i] = next[i] / norm;
  }
  return v;
}

double rayleigh(const Tensor& sym, const std::vector<double>& v) {
  const std::size_t n = sym.rows();
  double num = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += sym.at(i, j) * v[j];
    num += v[i] * acc;
  }
  return num;
}

}  // namespace

Projection2D linear_projection_2d(const Tensor& embeddings) {
  if (!embeddings.is_matrix()) throw ContractError("linear_projection_2d: matrix required");
  const std::size_t n = embeddings.rows(), dim = embeddings.cols();
  if (dim < 2) throw ContractError("linear_projection_2d: need hidden_dim >= 2");
  if (n < 2) throw ContractError("linear_projection_2d: need at least 2 rows");

  Tensor centered = embeddings;
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += centered.at(i, d);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered.at(i, d) -= mean;
  }
  Tensor cov = Tensor::zeros({dim, dim});
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += centered.at(i, a) * centered.at(i, b);
      acc /= static_cast<double>(n);
      cov.at(a, b) = acc;
      cov.at(b, a) = acc;
    }
  }

  constexpr int kPowerIters = 500;
  constexpr double kRankEps = 1e-12;
  Projection2D out;
  out.points = Tensor::zeros({n, 2});
  std::vector<double> v1 = power_iteration(cov, kPowerIters);
  const double lambda1 = rayleigh(cov, v1);
  if (lambda1 <= kRankEps) {
    out.degenerate = true;  // rank 0: all rows identical
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) acc += centered.at(i, d) * v1[d];
    out.points.at(i, 0) = acc;
  }
  // Deflate and repeat for the second axis.
  Tensor deflated = cov;
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = 0; b < dim; ++b) {
      deflated.at(a, b) -= lambda1 * v1[a] * v1[b];
    }
  }
  std::vector<double> v2 = power_iteration(deflated, kPowerIters);
  const double lambda2 = rayleigh(deflated, v2);
  if (lambda2 <= kRankEps * std::max(1.0, lambda1)) {
    out.degenerate = true;  // rank 1: second axis stays zero
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) acc += centered.at(i, d) * v2[d];
    out.points.at(i, 1) = acc;
  }
  return out;
}

}  // namespace mazeadapt
