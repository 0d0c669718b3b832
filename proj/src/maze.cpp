#include "mazeadapt/maze.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mazeadapt/error.hpp"
#include "mazeadapt/rng.hpp"

namespace mazeadapt {

using nlohmann::json;

namespace {

std::vector<GridEdge> full_grid_edges(int n) {
  std::vector<GridEdge> edges;
  edges.reserve(static_cast<std::size_t>(full_grid_edge_count(n)));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int u = x + n * y;
      if (x + 1 < n) edges.push_back({u, u + 1});
      if (y + 1 < n) edges.push_back({u, u + n});
    }
  }
  return edges;
}

std::vector<int> degrees(int num_nodes, const std::vector<GridEdge>& edges) {
  std::vector<int> deg(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& e : edges) {
    ++deg[static_cast<std::size_t>(e.u)];
    ++deg[static_cast<std::size_t>(e.v)];
  }
  return deg;
}

Tensor spatial_features(const GridMaze& maze) {
  const int num = maze.num_nodes();
  const auto orig = degrees(num, full_grid_edges(maze.n));
  const auto cur = degrees(num, maze.edges);
  Tensor f = Tensor::zeros({static_cast<std::size_t>(num), 5});
  for (int v = 0; v < num; ++v) {
    const auto [x, y] = maze.coords(v);
    const auto i = static_cast<std::size_t>(v);
    f.at(i, 0) = x;
    f.at(i, 1) = y;
    f.at(i, 2) = orig[i] - cur[i];  // blockage count
    f.at(i, 3) = orig[i];
    f.at(i, 4) = cur[i];
  }
  return f;
}

GridMaze generate_once(int n, double block_prob, std::uint64_t seed) {
  GridMaze maze;
  maze.n = n;
  maze.start = 0;
  maze.goal = n * n - 1;

  std::vector<GridEdge> edges = full_grid_edges(n);
  const auto num_blockages =
      static_cast<std::size_t>(block_prob * static_cast<double>(edges.size()));
  Rng rng(seed);
  rng.shuffle(edges);
  maze.removed_edges.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(num_blockages));
  maze.edges.assign(edges.begin() + static_cast<std::ptrdiff_t>(num_blockages), edges.end());
  std::sort(maze.edges.begin(), maze.edges.end());
  std::sort(maze.removed_edges.begin(), maze.removed_edges.end());
  maze.features = spatial_features(maze);
  maze.feature_mode = FeatureMode::Spatial;
  return maze;
}

json edges_to_json(const std::vector<GridEdge>& edges) {
  json arr = json::array();
  for (const auto& e : edges) arr.push_back({e.u, e.v});
  return arr;
}

std::vector<GridEdge> edges_from_json(const json& arr, const char* field, int num_nodes) {
  if (!arr.is_array()) throw ParseError(std::string("maze json: '") + field + "' must be an array");
  std::vector<GridEdge> edges;
  edges.reserve(arr.size());
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2) {
      throw ParseError(std::string("maze json: '") + field + "' entries must be [u, v] pairs");
    }
    GridEdge e{item[0].get<int>(), item[1].get<int>()};
    if (e.u >= e.v || e.u < 0 || e.v >= num_nodes) {
      throw ParseError(std::string("maze json: '") + field + "' pair [" + std::to_string(e.u) +
                       ", " + std::to_string(e.v) + "] is not an ordered in-range edge");
    }
    edges.push_back(e);
  }
  return edges;
}

}  // namespace

int full_grid_edge_count(int n) { return 2 * n * (n - 1); }

std::vector<std::vector<int>> GridMaze::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes()));
  for (const auto& e : edges) {
    adj[static_cast<std::size_t>(e.u)].push_back(e.v);
    adj[static_cast<std::size_t>(e.v)].push_back(e.u);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

bool GridMaze::connected_start_goal() const {
  const auto adj = adjacency();
  std::vector<char> seen(static_cast<std::size_t>(num_nodes()), 0);
  std::queue<int> q;
  q.push(start);
  seen[static_cast<std::size_t>(start)] = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    if (v == goal) return true;
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        q.push(w);
      }
    }
  }
  return false;
}

GridMaze create_maze_graph(int n, double block_prob, std::uint64_t seed, bool require_connected,
                           int max_retries) {
  if (n < 2) throw ContractError("create_maze_graph: n must be >= 2");
  if (!(block_prob >= 0.0 && block_prob < 1.0)) {
    throw ContractError("create_maze_graph: block probability must lie in [0, 1)");
  }
  GridMaze maze = generate_once(n, block_prob, seed);
  if (!require_connected) return maze;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    if (maze.connected_start_goal()) return maze;
    maze = generate_once(n, block_prob, seed + static_cast<std::uint64_t>(attempt) + 1);
  }
  if (maze.connected_start_goal()) return maze;
  throw GenerationError("create_maze_graph: no connected maze within " +
                        std::to_string(max_retries) + " retries (n=" + std::to_string(n) +
                        ", p=" + std::to_string(block_prob) + ", seed=" + std::to_string(seed) +
                        ")");
}

GridMaze randomize_features(const GridMaze& maze, int dim, std::uint64_t seed) {
  if (dim < 1) throw ContractError("randomize_features: dimension must be >= 1");
  GridMaze out = maze;
  out.features = Tensor::zeros({static_cast<std::size_t>(maze.num_nodes()),
                                static_cast<std::size_t>(dim)});
  Rng rng(seed);
  fill_normal(out.features.data, rng);
  out.feature_mode = FeatureMode::Gaussian;
  return out;
}

RewardMask sample_reward_mask(int n, double flip_prob, std::uint64_t seed) {
  if (n < 1) throw ContractError("sample_reward_mask: n must be >= 1");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
    throw ContractError("sample_reward_mask: flip probability must lie in [0, 1]");
  }
  RewardMask mask;
  mask.n = n;
  mask.flip_prob = flip_prob;
  mask.mult.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 1);
  Rng rng(seed);
  for (std::size_t v = 0; v < mask.mult.size(); ++v) {
    const bool flip = rng.uniform() < flip_prob;
    if (v != 0 && flip) mask.mult[v] = -1;  // start stays +1
  }
  return mask;
}

Tensor coordinate_features(const GridMaze& maze, bool normalized) {
  const int num = maze.num_nodes();
  const double div = normalized && maze.n > 1 ? static_cast<double>(maze.n - 1) : 1.0;
  Tensor f = Tensor::zeros({static_cast<std::size_t>(num), 2});
  for (int v = 0; v < num; ++v) {
    const auto [x, y] = maze.coords(v);
    f.at(static_cast<std::size_t>(v), 0) = x / div;
    f.at(static_cast<std::size_t>(v), 1) = y / div;
  }
  return f;
}

std::string maze_to_json(const GridMaze& maze) {
  json j;
  j["n"] = maze.n;
  j["start"] = maze.start;
  j["goal"] = maze.goal;
  j["edges"] = edges_to_json(maze.edges);
  j["removed_edges"] = edges_to_json(maze.removed_edges);
  json feats = json::array();
  const std::size_t dim = maze.features.cols();
  for (std::size_t v = 0; v < maze.features.rows(); ++v) {
    json row = json::array();
    for (std::size_t k = 0; k < dim; ++k) row.push_back(maze.features.at(v, k));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  j["feature_mode"] = maze.feature_mode == FeatureMode::Spatial ? "spatial" : "gaussian";
  return j.dump(2) + "\n";
}

GridMaze maze_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("maze json: ") + e.what());
  }
  for (const char* field : {"n", "start", "goal", "edges", "removed_edges", "features",
                            "feature_mode"}) {
    if (!j.contains(field)) {
      throw ParseError(std::string("maze json: missing field '") + field + "'");
    }
  }
  GridMaze maze;
  try {
    maze.n = j["n"].get<int>();
    if (maze.n < 1) throw ParseError("maze json: 'n' must be positive");
    maze.start = j["start"].get<int>();
    maze.goal = j["goal"].get<int>();
    const int num = maze.num_nodes();
    if (maze.start < 0 || maze.start >= num || maze.goal < 0 || maze.goal >= num) {
      throw ParseError("maze json: 'start'/'goal' out of range");
    }
    maze.edges = edges_from_json(j["edges"], "edges", num);
    maze.removed_edges = edges_from_json(j["removed_edges"], "removed_edges", num);
    const auto& feats = j["features"];
    if (!feats.is_array() || feats.size() != static_cast<std::size_t>(num)) {
      throw ParseError("maze json: 'features' must hold one row per node");
    }
    const std::size_t dim = feats.empty() ? 0 : feats[0].size();
    if (dim == 0) throw ParseError("maze json: 'features' rows must be non-empty");
    maze.features = Tensor::zeros({static_cast<std::size_t>(num), dim});
    for (std::size_t v = 0; v < feats.size(); ++v) {
      if (!feats[v].is_array() || feats[v].size() != dim) {
        throw ParseError("maze json: 'features' row " + std::to_string(v) +
                         " has inconsistent width");
      }
      for (std::size_t k = 0; k < dim; ++k) maze.features.at(v, k) = feats[v][k].get<double>();
    }
    const auto mode = j["feature_mode"].get<std::string>();
    if (mode == "spatial") {
      maze.feature_mode = FeatureMode::Spatial;
    } else if (mode == "gaussian") {
      maze.feature_mode = FeatureMode::Gaussian;
    } else {
      throw ParseError("maze json: unknown feature_mode '" + mode + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("maze json: ") + e.what());
  }
  return maze;
}

void save_maze(const GridMaze& maze, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << maze_to_json(maze);
}

GridMaze load_maze(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return maze_from_json(buf.str());
}

}  // namespace mazeadapt
