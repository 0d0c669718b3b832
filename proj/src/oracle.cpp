#include "mazeadapt/oracle.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <set>

#include "mazeadapt/error.hpp"

namespace mazeadapt {

PathLabels bfs_shortest_path(const GridMaze& maze) {
  const int n = maze.n;
  const int num = maze.num_nodes();
  std::set<GridEdge> active(maze.edges.begin(), maze.edges.end());
  auto has_edge = [&](int u, int v) {
    return active.count({std::min(u, v), std::max(u, v)}) != 0;
  };

  std::vector<int> parent(static_cast<std::size_t>(num), -1);
  std::vector<char> seen(static_cast<std::size_t>(num), 0);
  std::queue<int> q;
  q.push(maze.start);
  seen[static_cast<std::size_t>(maze.start)] = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    const auto [x, y] = maze.coords(v);
    // Right, Down, Left, Up
    const std::array<std::pair<int, int>, 4> steps{{{x + 1, y}, {x, y + 1}, {x - 1, y}, {x, y - 1}}};
    for (const auto& [nx, ny] : steps) {
      if (nx < 0 || nx >= n || ny < 0 || ny >= n) continue;
      const int w = maze.id(nx, ny);
      if (seen[static_cast<std::size_t>(w)] || !has_edge(v, w)) continue;
      seen[static_cast<std::size_t>(w)] = 1;
      parent[static_cast<std::size_t>(w)] = v;
      q.push(w);
    }
  }
  if (!seen[static_cast<std::size_t>(maze.goal)]) {
    throw ContractError("bfs_shortest_path: goal unreachable from start");
  }

  PathLabels out;
  out.labels.assign(static_cast<std::size_t>(num), 0);
  for (int v = maze.goal; v != -1; v = parent[static_cast<std::size_t>(v)]) {
    out.path.push_back(v);
    out.labels[static_cast<std::size_t>(v)] = 1;
    if (v == maze.start) break;
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

ValueTable dp_value(int n, const RewardMask& mask) {
  if (n < 1) throw ContractError("dp_value: n must be >= 1");
  if (mask.n != n || mask.mult.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw ContractError("dp_value: mask size does not match n");
  }
  ValueTable t;
  t.n = n;
  const std::size_t num = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  t.values.assign(num, 0.0);
  t.rewards.assign(num, 0.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const std::size_t idx = static_cast<std::size_t>(x + n * y);
      t.rewards[idx] = static_cast<double>(mask.mult[idx]) * static_cast<double>(x + y);
    }
  }
  // Reverse topological sweep over the Down/Right DAG.
  for (int y = n - 1; y >= 0; --y) {
    for (int x = n - 1; x >= 0; --x) {
      const std::size_t idx = static_cast<std::size_t>(x + n * y);
      const bool has_down = y + 1 < n;
      const bool has_right = x + 1 < n;
      if (!has_down && !has_right) {
        t.values[idx] = t.rewards[idx];
      } else if (has_down && has_right) {
        t.values[idx] =
            t.rewards[idx] + std::max(t.value_at(x, y + 1), t.value_at(x + 1, y));
      } else if (has_down) {
        t.values[idx] = t.rewards[idx] + t.value_at(x, y + 1);
      } else {
        t.values[idx] = t.rewards[idx] + t.value_at(x + 1, y);
      }
    }
  }
  return t;
}

PolicyTable greedy_policy(int n, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw ContractError("greedy_policy: value count does not match n");
  }
  PolicyTable p;
  p.n = n;
  p.actions.assign(values.size(), Action::Terminal);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const std::size_t idx = static_cast<std::size_t>(x + n * y);
      const bool has_down = y + 1 < n;
      const bool has_right = x + 1 < n;
      if (!has_down && !has_right) {
        p.actions[idx] = Action::Terminal;
      } else if (!has_down) {
        p.actions[idx] = Action::Right;
      } else if (!has_right) {
        p.actions[idx] = Action::Down;
      } else {
        const double down = values[static_cast<std::size_t>(x + n * (y + 1))];
        const double right = values[static_cast<std::size_t>(x + 1 + n * y)];
        p.actions[idx] = down >= right ? Action::Down : Action::Right;  // ties -> Down
      }
    }
  }
  return p;
}

PolicyTable optimal_policy(const ValueTable& values) {
  return greedy_policy(values.n, values.values);
}

namespace {

void monotone_dfs(int n, int x, int y, std::vector<int>& current,
                  std::vector<std::vector<int>>& out, std::size_t limit) {
  current.push_back(x + n * y);
  if (x == n - 1 && y == n - 1) {
    if (out.size() >= limit) {
      throw ContractError("enumerate_monotone_paths: more than " + std::to_string(limit) +
                          " paths");
    }
    out.push_back(current);
  } else {
    if (y + 1 < n) monotone_dfs(n, x, y + 1, current, out, limit);
    if (x + 1 < n) monotone_dfs(n, x + 1, y, current, out, limit);
  }
  current.pop_back();
}

void simple_dfs(const std::vector<std::vector<int>>& adj, int v, int goal,
                std::vector<char>& visited, std::vector<int>& current,
                std::vector<std::vector<int>>& out, std::size_t limit) {
  visited[static_cast<std::size_t>(v)] = 1;
  current.push_back(v);
  if (v == goal) {
    if (out.size() >= limit) {
      throw ContractError("enumerate_simple_paths: more than " + std::to_string(limit) + " paths");
    }
    out.push_back(current);
  } else {
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!visited[static_cast<std::size_t>(w)]) {
        simple_dfs(adj, w, goal, visited, current, out, limit);
      }
    }
  }
  current.pop_back();
  visited[static_cast<std::size_t>(v)] = 0;
}

}  // namespace

std::vector<std::vector<int>> enumerate_monotone_paths(int n, std::size_t limit) {
  if (n < 1) throw ContractError("enumerate_monotone_paths: n must be >= 1");
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  monotone_dfs(n, 0, 0, current, out, limit);
  return out;
}

std::vector<std::vector<int>> enumerate_simple_paths(const GridMaze& maze, std::size_t limit) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  std::vector<char> visited(static_cast<std::size_t>(maze.num_nodes()), 0);
  const auto adj = maze.adjacency();
  simple_dfs(adj, maze.start, maze.goal, visited, current, out, limit);
  return out;
}

double path_score(std::span<const int> path, const ValueTable& table) {
  double total = 0.0;
  for (int v : path) total += table.rewards[static_cast<std::size_t>(v)];
  return total;
}

}  // namespace mazeadapt
