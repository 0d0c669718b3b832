#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mazeadapt/maze.hpp"

namespace mazeadapt {

// Ground truth for the classification task: per-node membership of the
// canonical shortest path plus the path itself (start -> goal).
struct PathLabels {
  std::vector<int> labels;  // id-indexed, 1 = on the canonical shortest path
  std::vector<int> path;    // ordered node ids, start first
};

// Canonical BFS: neighbors expand in Right, Down, Left, Up order and the
// first-discovered predecessor is kept, which pins one shortest path among
// the generally many. Throws ContractError when the goal is unreachable.
PathLabels bfs_shortest_path(const GridMaze& maze);

// Value task ground truth over the Down/Right DAG:
//   V(i,j) = R(i,j) + max(V(i+1,j), V(i,j+1)),  R(i,j) = mask(i,j) * (i+j),
// with i the row (y) and j the column (x). Boundary cells use their single
// successor and V(goal) = R(goal).
struct ValueTable {
  int n = 0;
  std::vector<double> values;   // id-indexed
  std::vector<double> rewards;  // id-indexed

  double value_at(int x, int y) const { return values[static_cast<std::size_t>(x + n * y)]; }
  double reward_at(int x, int y) const { return rewards[static_cast<std::size_t>(x + n * y)]; }
};

ValueTable dp_value(int n, const RewardMask& mask);

enum class Action : std::uint8_t { Down, Right, Terminal };

struct PolicyTable {
  int n = 0;
  std::vector<Action> actions;  // id-indexed

  Action at(int x, int y) const { return actions[static_cast<std::size_t>(x + n * y)]; }
};

// Greedy argmax over the existing Down/Right successors of a value table
// (ties -> Down; bottom row forces Right, right column forces Down).
PolicyTable greedy_policy(int n, std::span<const double> values);
PolicyTable optimal_policy(const ValueTable& values);

// Exhaustive enumeration oracles. Both throw ContractError once the path
// count exceeds `limit`; they exist to cross-check bfs_shortest_path and
// dp_value on small instances.
std::vector<std::vector<int>> enumerate_monotone_paths(int n, std::size_t limit);
std::vector<std::vector<int>> enumerate_simple_paths(const GridMaze& maze, std::size_t limit);

// Sum of rewards along a node-id path.
double path_score(std::span<const int> path, const ValueTable& table);

}  // namespace mazeadapt
