#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mazeadapt/tensor.hpp"

namespace mazeadapt {

enum class FeatureMode { Spatial, Gaussian };

struct GridEdge {
  int u = 0;
  int v = 0;  // always u < v
  friend bool operator==(const GridEdge&, const GridEdge&) = default;
  friend auto operator<=>(const GridEdge&, const GridEdge&) = default;
};

// 4-neighbor grid maze. Node id = x + n*y with x the column and y the row;
// start is the top-left corner (0,0), goal the bottom-right (n-1,n-1).
// Spatial features per node: [x, y, blockage_count, original_degree,
// current_degree]. Immutable once generated.
struct GridMaze {
  int n = 0;
  int start = 0;
  int goal = 0;
  std::vector<GridEdge> edges;          // active, sorted
  std::vector<GridEdge> removed_edges;  // sorted
  Tensor features;                      // num_nodes x feature_dim
  FeatureMode feature_mode = FeatureMode::Spatial;

  int num_nodes() const { return n * n; }
  int id(int x, int y) const { return x + n * y; }
  std::pair<int, int> coords(int node) const { return {node % n, node / n}; }
  std::vector<std::vector<int>> adjacency() const;  // active edges, ascending neighbor ids
  bool connected_start_goal() const;
};

// Number of edges of the full n x n 4-neighbor grid: 2n(n-1).
int full_grid_edge_count(int n);

// Generates the full grid, removes floor(p * |edges|) edges chosen by a
// seeded uniform shuffle, and recomputes features. With require_connected the
// draw is retried with seed+1, seed+2, ... until a start->goal path exists
// (GenerationError once the retry budget is spent).
GridMaze create_maze_graph(int n, double block_prob, std::uint64_t seed,
                           bool require_connected = true, int max_retries = 1000);

// Same structure, features replaced by i.i.d. standard normal draws.
GridMaze randomize_features(const GridMaze& maze, int dim, std::uint64_t seed);

// Per-node multiplier in {+1, -1}; the start node is always +1.
struct RewardMask {
  int n = 0;
  double flip_prob = 0.0;
  std::vector<int> mult;  // id-indexed

  int at(int x, int y) const { return mult[static_cast<std::size_t>(x + n * y)]; }
};

RewardMask sample_reward_mask(int n, double flip_prob, std::uint64_t seed);

// N x 2 matrix of (x, y) coordinates; optionally divided by (n-1) so that
// weights trained on one size accept inputs from another.
Tensor coordinate_features(const GridMaze& maze, bool normalized);

std::string maze_to_json(const GridMaze& maze);
GridMaze maze_from_json(std::string_view text);
void save_maze(const GridMaze& maze, const std::string& path);
GridMaze load_maze(const std::string& path);

}  // namespace mazeadapt
