#include "mazeadapt/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mazeadapt/error.hpp"

namespace mazeadapt {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSeedStride = 10000;

std::vector<std::pair<double, double>> node_coords(const GridMaze& maze) {
  std::vector<std::pair<double, double>> coords;
  coords.reserve(static_cast<std::size_t>(maze.num_nodes()));
  for (int v = 0; v < maze.num_nodes(); ++v) {
    const auto [x, y] = maze.coords(v);
    coords.emplace_back(x, y);
  }
  return coords;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

double cycle(const std::vector<double>& values, int index) {
  if (values.empty()) throw ContractError("empty probability list");
  return values[static_cast<std::size_t>(index) % values.size()];
}

json classification_json(const ClassificationReport& r) {
  return json{{"bce", r.bce}, {"accuracy", r.accuracy}};
}

json regression_json(const RegressionReport& r, double policy_acc) {
  return json{{"mse", r.mse}, {"mae", r.mae}, {"r2", r.r2}, {"policy_accuracy", policy_acc}};
}

double mean_of(const json& entries, const char* group, const char* field) {
  double total = 0.0;
  for (const auto& e : entries) total += e.at(group).at(field).get<double>();
  return total / static_cast<double>(entries.size());
}

// Mean adapted/unadapted pairs recomputed from the per-instance entries.
json paired_aggregates(const json& entries, const std::vector<std::string>& fields) {
  json agg;
  for (const char* group : {"adapted", "unadapted"}) {
    json g;
    for (const auto& f : fields) g[f] = mean_of(entries, group, f.c_str());
    agg[group] = std::move(g);
  }
  return agg;
}

struct ClassifyPipeline {
  GridMaze base_maze;
  PathLabels base_labels;
  GcnConfig gcn_config;
  ParamVector theta;
  TrainTrace gcn_trace;
  GcnOutput base_output;
  ControllerConfig ctrl_config;
  ParamVector phi;
  ControllerTrace ctrl_trace;
  std::vector<AdaptationTask> tasks;
};

ControllerConfig make_controller_config(const ExperimentConfig& cfg, const GcnConfig& gcn,
                                        int num_nodes) {
  ControllerConfig c;
  c.input = controller_input_from_name(cfg.ctrl.input);
  c.hidden = cfg.ctrl.hidden;
  c.delta_scale = cfg.ctrl.delta_scale;
  c.replace_params = cfg.ctrl.replace_params;
  c.input_dim = controller_input_dim(c.input, gcn, num_nodes);
  c.output_dim = gcn.num_params();
  return c;
}

void assert_task_disjoint(const std::vector<AdaptationTask>& tasks, const GridMaze& heldout) {
  for (const auto& t : tasks) {
    if (t.maze.n == heldout.n && t.maze.edges == heldout.edges) {
      throw Error("held-out maze collides with training task " + std::to_string(t.id));
    }
  }
}

void assert_mask_disjoint(const std::vector<AdaptationTask>& tasks, const RewardMask& heldout) {
  for (const auto& t : tasks) {
    if (t.mask.mult == heldout.mult) {
      throw Error("held-out reward mask collides with training task " + std::to_string(t.id));
    }
  }
}

// Trains the Experiment 1/2/4 pipeline: base GCN on the unblocked maze,
// then the controller on blocked variants.
ClassifyPipeline train_classify_pipeline(const ExperimentConfig& cfg) {
  ClassifyPipeline p;
  p.base_maze = create_maze_graph(cfg.maze_size, 0.0, cfg.maze_seed, cfg.require_connected);
  p.base_labels = bfs_shortest_path(p.base_maze);
  p.gcn_config = GcnConfig{5, cfg.gcn.hidden_dim, 1, GcnMode::Classify};
  const TrainHyper hyper{cfg.gcn.lr, cfg.gcn.epochs, cfg.gcn.momentum};
  p.theta = train_first_order(p.base_maze, p.base_labels, p.gcn_config, hyper, cfg.init_seed,
                              &p.gcn_trace);
  p.base_output = gcn_forward(p.base_maze.features, build_propagation_matrix(p.base_maze),
                              p.theta, p.gcn_config);

  if (cfg.num_tasks < 1) throw ContractError("experiment needs at least one adaptation task");
  for (int i = 0; i < cfg.num_tasks; ++i) {
    GridMaze maze = create_maze_graph(cfg.maze_size, cycle(cfg.task_block_probs, i),
                                      task_seed(cfg.maze_seed, i), cfg.require_connected);
    p.tasks.push_back(make_classify_task(i, std::move(maze)));
  }
  p.ctrl_config = make_controller_config(cfg, p.gcn_config, p.base_maze.num_nodes());
  const ControllerTrainHyper chyper{cfg.ctrl.lr, cfg.ctrl.epochs, cfg.ctrl.momentum};

  std::function<std::vector<AdaptationTask>(int)> resampler;
  if (cfg.ctrl.resample_tasks) {
    const ExperimentConfig cfg_copy = cfg;
    resampler = [cfg_copy](int epoch) {
      std::vector<AdaptationTask> fresh;
      for (int i = 0; i < cfg_copy.num_tasks; ++i) {
        GridMaze maze = create_maze_graph(cfg_copy.maze_size, cycle(cfg_copy.task_block_probs, i),
                                          resample_seed(cfg_copy.maze_seed, epoch, i),
                                          cfg_copy.require_connected);
        fresh.push_back(make_classify_task(i, std::move(maze)));
      }
      return fresh;
    };
  }
  p.phi = train_controller(p.tasks, p.theta, p.gcn_config, p.ctrl_config, chyper,
                           cfg.controller_seed, &p.ctrl_trace, resampler);
  return p;
}

// Adapted/unadapted classification metrics plus latent correlations on one
// evaluation maze.
json evaluate_classify_maze(const ClassifyPipeline& p, const AdaptationTask& task,
                            MazeMetric metric, Tensor* adapted_latent_out = nullptr) {
  std::vector<int> labels(task.targets.data.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = task.targets.data[i] > 0.5 ? 1 : 0;
  }
  const auto coords = node_coords(task.maze);

  const GcnOutput unadapted = gcn_forward(task.features, task.a_hat, p.theta, p.gcn_config);
  const ClassificationReport un = bce_and_accuracy(unadapted.y.data, labels);
  const IsomorphismReport un_iso = distance_correlations(unadapted.z, coords, metric);

  const ParamVector theta_prime = adapt_for_task(task, p.theta, p.phi, p.gcn_config,
                                                 p.ctrl_config);
  const GcnOutput adapted = gcn_forward(task.features, task.a_hat, theta_prime, p.gcn_config);
  const ClassificationReport ad = bce_and_accuracy(adapted.y.data, labels);
  const IsomorphismReport ad_iso = distance_correlations(adapted.z, coords, metric);
  if (adapted_latent_out) *adapted_latent_out = adapted.z;

  json j;
  j["task_id"] = task.id;
  j["adapted"] = classification_json(ad);
  j["adapted"]["pearson"] = ad_iso.pearson;
  j["adapted"]["spearman"] = ad_iso.spearman;
  j["unadapted"] = classification_json(un);
  j["unadapted"]["pearson"] = un_iso.pearson;
  j["unadapted"]["spearman"] = un_iso.spearman;
  return j;
}

json trace_json(const ControllerTrace& trace) {
  json j;
  j["total"] = trace.total;
  return j;
}

void write_projection_csv(const std::string& path, const GridMaze& maze, const Tensor& latent) {
  const Projection2D proj = linear_projection_2d(latent);
  auto out = open_out(path);
  out << "node_id,x,y,p0,p1\n";
  for (int v = 0; v < maze.num_nodes(); ++v) {
    const auto [x, y] = maze.coords(v);
    const auto i = static_cast<std::size_t>(v);
    out << v << ',' << x << ',' << y << ',' << format_double(proj.points.at(i, 0)) << ','
        << format_double(proj.points.at(i, 1)) << '\n';
  }
}

json kmeans_json(const Tensor& latent, const PathLabels& labels, std::uint64_t seed) {
  constexpr int k = 4;
  const KmeansResult km = kmeans(latent, k, seed);
  std::vector<int> sizes(k, 0);
  std::vector<int> path_counts(k, 0);
  for (std::size_t i = 0; i < km.assignment.size(); ++i) {
    ++sizes[static_cast<std::size_t>(km.assignment[i])];
    if (labels.labels[i]) ++path_counts[static_cast<std::size_t>(km.assignment[i])];
  }
  const int path_total = static_cast<int>(labels.path.size());
  const int densest = *std::max_element(path_counts.begin(), path_counts.end());
  json j;
  j["k"] = k;
  j["inertia"] = km.inertia;
  j["cluster_sizes"] = sizes;
  // Fraction of path nodes captured by their most common cluster.
  j["path_cluster_fraction"] =
      path_total > 0 ? static_cast<double>(densest) / static_cast<double>(path_total) : 0.0;
  return j;
}

json run_experiment_1_or_2(const ExperimentConfig& cfg, const std::string& out_dir) {
  const MazeMetric metric = maze_metric_from_name(cfg.maze_metric);
  ClassifyPipeline p = train_classify_pipeline(cfg);

  json report;
  report["base_training"] = {
      {"final_loss", p.gcn_trace.loss.empty() ? 0.0 : p.gcn_trace.loss.back()},
      {"train", classification_json(bce_and_accuracy(
                    p.base_output.y.data,
                    std::span<const int>(p.base_labels.labels)))}};
  const IsomorphismReport iso =
      distance_correlations(p.base_output.z, node_coords(p.base_maze), metric);
  report["isomorphism"] = {{"pearson", iso.pearson},
                           {"spearman", iso.spearman},
                           {"num_pairs", iso.num_pairs}};
  report["kmeans"] = kmeans_json(p.base_output.z, p.base_labels, cfg.maze_seed);
  report["controller"] = {
      {"input_dim", p.ctrl_config.input_dim},
      {"output_dim", p.ctrl_config.output_dim},
      {"final_loss", p.ctrl_trace.total.empty() ? 0.0 : p.ctrl_trace.total.back()},
      {"loss_trace", trace_json(p.ctrl_trace)}};

  json entries = json::array();
  for (int j = 0; j < cfg.num_test_mazes; ++j) {
    const double prob = cycle(cfg.test_block_probs, j);
    GridMaze maze = create_maze_graph(cfg.maze_size, prob, heldout_seed(cfg.maze_seed, j),
                                      cfg.require_connected);
    assert_task_disjoint(p.tasks, maze);
    AdaptationTask task = make_classify_task(1000 + j, std::move(maze));
    json entry = evaluate_classify_maze(p, task, metric);
    entry["block_prob"] = prob;
    entries.push_back(std::move(entry));
  }
  report["test_mazes"] = entries;
  report["aggregates"] = paired_aggregates(entries, {"bce", "accuracy", "pearson", "spearman"});

  if (!out_dir.empty()) {
    write_embeddings_csv(out_dir + "/embeddings.csv", p.base_maze, p.base_output.z);
    write_projection_csv(out_dir + "/projection2d.csv", p.base_maze, p.base_output.z);
    write_controller_loss_csv(out_dir + "/controller_loss.csv", p.ctrl_trace);
    report["artifacts"] = {{"report", "report.json"},
                           {"embeddings_csv", "embeddings.csv"},
                           {"projection2d_csv", "projection2d.csv"},
                           {"controller_loss_csv", "controller_loss.csv"}};
  }
  return report;
}

json run_experiment_4(const ExperimentConfig& cfg, const std::string& out_dir) {
  const MazeMetric metric = maze_metric_from_name(cfg.maze_metric);
  ClassifyPipeline p = train_classify_pipeline(cfg);

  json report;
  json iso_entries = json::array();
  json noniso_entries = json::array();
  std::vector<Tensor> noniso_latents;
  std::vector<GridMaze> noniso_mazes;
  for (int j = 0; j < cfg.num_test_mazes; ++j) {
    const double prob = cycle(cfg.test_block_probs, j);
    GridMaze maze = create_maze_graph(cfg.maze_size, prob, heldout_seed(cfg.maze_seed, j),
                                      cfg.require_connected);
    assert_task_disjoint(p.tasks, maze);
    GridMaze noniso = randomize_features(maze, cfg.gaussian_dim, gaussian_seed(cfg.maze_seed, j));

    AdaptationTask iso_task = make_classify_task(1000 + j, std::move(maze));
    json iso_entry = evaluate_classify_maze(p, iso_task, metric);
    iso_entry["block_prob"] = prob;
    iso_entries.push_back(std::move(iso_entry));

    AdaptationTask noniso_task = make_classify_task(2000 + j, noniso);
    Tensor latent;
    json noniso_entry = evaluate_classify_maze(p, noniso_task, metric, &latent);
    noniso_entry["block_prob"] = prob;
    noniso_entries.push_back(std::move(noniso_entry));
    noniso_latents.push_back(std::move(latent));
    noniso_mazes.push_back(std::move(noniso));
  }
  report["isomorphic"] = iso_entries;
  report["non_isomorphic"] = noniso_entries;
  const std::vector<std::string> fields{"bce", "accuracy", "pearson", "spearman"};
  report["aggregates"] = {{"isomorphic", paired_aggregates(iso_entries, fields)},
                          {"non_isomorphic", paired_aggregates(noniso_entries, fields)}};
  // The collapse criterion reads correlations as magnitudes; surface both.
  double signed_mean = 0.0, abs_mean = 0.0;
  for (const auto& e : noniso_entries) {
    const double r = e.at("adapted").at("pearson").get<double>();
    signed_mean += r;
    abs_mean += std::abs(r);
  }
  signed_mean /= static_cast<double>(noniso_entries.size());
  abs_mean /= static_cast<double>(noniso_entries.size());
  report["aggregates"]["non_isomorphic"]["adapted_pearson_signed_mean"] = signed_mean;
  report["aggregates"]["non_isomorphic"]["adapted_pearson_abs_mean"] = abs_mean;
  report["controller"] = {
      {"final_loss", p.ctrl_trace.total.empty() ? 0.0 : p.ctrl_trace.total.back()},
      {"loss_trace", trace_json(p.ctrl_trace)}};

  if (!out_dir.empty()) {
    json artifacts = {{"report", "report.json"},
                      {"controller_loss_csv", "controller_loss.csv"}};
    write_controller_loss_csv(out_dir + "/controller_loss.csv", p.ctrl_trace);
    for (std::size_t j = 0; j < noniso_latents.size(); ++j) {
      const std::string name = "noniso_embeddings_" + std::to_string(j) + ".csv";
      write_embeddings_csv(out_dir + "/" + name, noniso_mazes[j], noniso_latents[j]);
      artifacts["noniso_embeddings_" + std::to_string(j) + "_csv"] = name;
    }
    report["artifacts"] = std::move(artifacts);
  }
  return report;
}

json run_experiment_3(const ExperimentConfig& cfg, const std::string& out_dir) {
  const MazeMetric metric = maze_metric_from_name(cfg.maze_metric);
  if (cfg.exp3_studies.empty()) throw ContractError("experiment 3 needs at least one study");

  json studies = json::array();
  for (std::size_t s = 0; s < cfg.exp3_studies.size(); ++s) {
    const Exp3Study& study = cfg.exp3_studies[s];
    if (study.train_sizes.empty() || study.eval_sizes.empty()) {
      throw ContractError("experiment 3 study needs train and eval sizes");
    }
    const int max_train = *std::max_element(study.train_sizes.begin(), study.train_sizes.end());
    for (int size : study.eval_sizes) {
      if (size <= max_train) {
        throw ContractError("experiment 3 evaluation sizes must be strictly larger than every "
                            "training size");
      }
    }

    std::vector<GridMaze> train_mazes;
    for (int size : study.train_sizes) {
      train_mazes.push_back(create_maze_graph(size, 0.0, cfg.maze_seed, cfg.require_connected));
    }
    const GcnConfig gcn_config{2, cfg.gcn.hidden_dim, 1, GcnMode::DistancePreserve};
    const TrainHyper hyper{cfg.gcn.lr, cfg.gcn.epochs, cfg.gcn.momentum};
    TrainTrace gcn_trace;
    const ParamVector theta = train_distance_preserving(train_mazes, gcn_config, hyper,
                                                        cfg.init_seed, cfg.cross_size_normalize,
                                                        &gcn_trace);

    // Controller on blocked variants of the smallest training maze.
    const int task_size = study.train_sizes.front();
    std::vector<AdaptationTask> tasks;
    for (int i = 0; i < cfg.num_tasks; ++i) {
      GridMaze maze = create_maze_graph(task_size, cycle(cfg.exp3_ctrl_block_probs, i),
                                        task_seed(cfg.maze_seed, i), cfg.require_connected);
      tasks.push_back(make_distance_task(i, std::move(maze), cfg.cross_size_normalize));
    }
    const ControllerConfig ctrl_config =
        make_controller_config(cfg, gcn_config, task_size * task_size);
    const ControllerTrainHyper chyper{cfg.ctrl.lr, cfg.ctrl.epochs, cfg.ctrl.momentum};
    ControllerTrace ctrl_trace;
    const ParamVector phi = train_controller(tasks, theta, gcn_config, ctrl_config, chyper,
                                             cfg.controller_seed, &ctrl_trace);

    GridMaze heldout = create_maze_graph(task_size, cycle(cfg.exp3_ctrl_block_probs, 0),
                                         heldout_seed(cfg.maze_seed, 0), cfg.require_connected);
    assert_task_disjoint(tasks, heldout);
    const AdaptationTask heldout_task =
        make_distance_task(1000, std::move(heldout), cfg.cross_size_normalize);
    const ParamVector theta_post =
        adapt_for_task(heldout_task, theta, phi, gcn_config, ctrl_config);

    json evals = json::array();
    for (std::size_t e = 0; e < study.eval_sizes.size(); ++e) {
      const int size = study.eval_sizes[e];
      const GridMaze maze = create_maze_graph(size, 0.0, cfg.maze_seed, cfg.require_connected);
      const Tensor features = coordinate_features(maze, cfg.cross_size_normalize);
      const Tensor a_hat = build_propagation_matrix(maze);
      const auto coords = node_coords(maze);
      const GcnOutput pre = gcn_forward(features, a_hat, theta, gcn_config);
      const IsomorphismReport pre_iso = distance_correlations(pre.z, coords, metric);
      const GcnOutput post = gcn_forward(features, a_hat, theta_post, gcn_config);
      const IsomorphismReport post_iso = distance_correlations(post.z, coords, metric);
      evals.push_back({{"size", size},
                       {"pre_adaptation", {{"pearson", pre_iso.pearson},
                                           {"spearman", pre_iso.spearman}}},
                       {"post_adaptation", {{"pearson", post_iso.pearson},
                                            {"spearman", post_iso.spearman}}}});
    }
    studies.push_back({{"train_sizes", study.train_sizes},
                       {"final_training_loss",
                        gcn_trace.loss.empty() ? 0.0 : gcn_trace.loss.back()},
                       {"controller_final_loss",
                        ctrl_trace.total.empty() ? 0.0 : ctrl_trace.total.back()},
                       {"evaluations", evals}});
    if (!out_dir.empty()) {
      write_controller_loss_csv(out_dir + "/controller_loss_study" + std::to_string(s) + ".csv",
                                ctrl_trace);
    }
  }

  json report;
  report["studies"] = studies;
  if (!out_dir.empty()) {
    json artifacts = {{"report", "report.json"}};
    for (std::size_t s = 0; s < cfg.exp3_studies.size(); ++s) {
      artifacts["controller_loss_study" + std::to_string(s) + "_csv"] =
          "controller_loss_study" + std::to_string(s) + ".csv";
    }
    report["artifacts"] = std::move(artifacts);
  }
  return report;
}

json run_experiment_5(const ExperimentConfig& cfg, const std::string& out_dir) {
  const int n = cfg.maze_size;
  const RewardMask unmasked = sample_reward_mask(n, 0.0, cfg.maze_seed);
  const ValueTable base_values = dp_value(n, unmasked);
  const GcnConfig gcn_config{3, cfg.gcn.hidden_dim, 1, GcnMode::Regress};
  const TrainHyper hyper{cfg.gcn.lr, cfg.gcn.epochs, cfg.gcn.momentum};
  TrainTrace gcn_trace;
  const ParamVector theta = train_value_regressor(n, unmasked, base_values, gcn_config, hyper,
                                                  cfg.init_seed, &gcn_trace);

  const Tensor base_features = value_features(n, unmasked);
  const GridMaze grid = create_maze_graph(n, 0.0, 0, /*require_connected=*/false);
  const Tensor a_hat = build_propagation_matrix(grid);
  const GcnOutput base_out = gcn_forward(base_features, a_hat, theta, gcn_config);
  const RegressionReport train_rep = regression_report(base_out.y.data, base_values.values);

  std::vector<AdaptationTask> tasks;
  for (int i = 0; i < cfg.num_tasks; ++i) {
    tasks.push_back(
        make_value_task(i, n, sample_reward_mask(n, cfg.mask_q, task_seed(cfg.maze_seed, i))));
  }
  const ControllerConfig ctrl_config = make_controller_config(cfg, gcn_config, n * n);
  const ControllerTrainHyper chyper{cfg.ctrl.lr, cfg.ctrl.epochs, cfg.ctrl.momentum};
  ControllerTrace ctrl_trace;
  const ParamVector phi = train_controller(tasks, theta, gcn_config, ctrl_config, chyper,
                                           cfg.controller_seed, &ctrl_trace);

  auto evaluate_mask = [&](const RewardMask& mask, int task_id) {
    const ValueTable table = dp_value(n, mask);
    const PolicyTable oracle = optimal_policy(table);
    const AdaptationTask task = make_value_task(task_id, n, mask);

    const GcnOutput un = gcn_forward(task.features, task.a_hat, theta, gcn_config);
    const RegressionReport un_rep = regression_report(un.y.data, table.values);
    const double un_policy = policy_accuracy(un.y.data, oracle);

    const ParamVector theta_prime = adapt_for_task(task, theta, phi, gcn_config, ctrl_config);
    const GcnOutput ad = gcn_forward(task.features, task.a_hat, theta_prime, gcn_config);
    const RegressionReport ad_rep = regression_report(ad.y.data, table.values);
    const double ad_policy = policy_accuracy(ad.y.data, oracle);

    json j;
    j["task_id"] = task_id;
    j["adapted"] = regression_json(ad_rep, ad_policy);
    j["unadapted"] = regression_json(un_rep, un_policy);
    return j;
  };

  json entries = json::array();
  for (int j = 0; j < cfg.num_test_mazes; ++j) {
    const RewardMask mask = sample_reward_mask(n, cfg.mask_q, heldout_seed(cfg.maze_seed, j));
    assert_mask_disjoint(tasks, mask);
    entries.push_back(evaluate_mask(mask, 1000 + j));
  }

  json report;
  report["base_training"] = {{"final_loss", gcn_trace.loss.empty() ? 0.0 : gcn_trace.loss.back()},
                             {"train", {{"mse", train_rep.mse},
                                        {"mae", train_rep.mae},
                                        {"r2", train_rep.r2}}}};
  report["controller"] = {
      {"final_loss", ctrl_trace.total.empty() ? 0.0 : ctrl_trace.total.back()},
      {"loss_trace", trace_json(ctrl_trace)}};
  report["test_masks"] = entries;
  report["aggregates"] =
      paired_aggregates(entries, {"mse", "mae", "r2", "policy_accuracy"});
  // Unperturbed-mask diagnostic: the controller should stay close to the
  // already-correct baseline when nothing was flipped.
  report["q0_diagnostic"] = evaluate_mask(unmasked, 9000);

  if (!out_dir.empty()) {
    write_controller_loss_csv(out_dir + "/controller_loss.csv", ctrl_trace);
    report["artifacts"] = {{"report", "report.json"},
                           {"controller_loss_csv", "controller_loss.csv"}};
  }
  return report;
}

}  // namespace

std::uint64_t task_seed(std::uint64_t maze_seed, int index) {
  return maze_seed + kSeedStride * static_cast<std::uint64_t>(index + 1);
}

std::uint64_t heldout_seed(std::uint64_t maze_seed, int index) {
  return maze_seed + kSeedStride * static_cast<std::uint64_t>(101 + index);
}

std::uint64_t gaussian_seed(std::uint64_t maze_seed, int index) {
  return maze_seed + kSeedStride * static_cast<std::uint64_t>(201 + index);
}

std::uint64_t resample_seed(std::uint64_t maze_seed, int epoch, int index) {
  return maze_seed + kSeedStride * static_cast<std::uint64_t>(1001 + epoch) +
         static_cast<std::uint64_t>(index) * 100;
}

MazeMetric maze_metric_from_name(std::string_view name) {
  if (name == "euclidean") return MazeMetric::Euclidean;
  if (name == "manhattan") return MazeMetric::Manhattan;
  throw ParseError("unknown maze metric '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (experiment < 1 || experiment > 5) {
    throw ContractError("experiment id must lie in 1..5");
  }
  if (maze_size < 2) throw ContractError("maze_size must be >= 2");
  if (num_tasks < 1) throw ContractError("num_tasks must be >= 1");
  if (num_test_mazes < 1) throw ContractError("num_test_mazes must be >= 1");
  if (!(mask_q >= 0.0 && mask_q <= 1.0)) throw ContractError("mask_q must lie in [0, 1]");
  maze_metric_from_name(maze_metric);
  controller_input_from_name(ctrl.input);
  if (gaussian_dim < 1) throw ContractError("gaussian_dim must be >= 1");
}

json ExperimentConfig::to_json() const {
  json studies = json::array();
  for (const auto& s : exp3_studies) {
    studies.push_back({{"train_sizes", s.train_sizes}, {"eval_sizes", s.eval_sizes}});
  }
  return json{
      {"experiment", experiment},
      {"maze_size", maze_size},
      {"task_block_probs", task_block_probs},
      {"test_block_probs", test_block_probs},
      {"num_tasks", num_tasks},
      {"num_test_mazes", num_test_mazes},
      {"mask_q", mask_q},
      {"maze_seed", maze_seed},
      {"init_seed", init_seed},
      {"controller_seed", controller_seed},
      {"require_connected", require_connected},
      {"maze_metric", maze_metric},
      {"gaussian_dim", gaussian_dim},
      {"cross_size_normalize", cross_size_normalize},
      {"exp3_studies", studies},
      {"exp3_ctrl_block_probs", exp3_ctrl_block_probs},
      {"gcn",
       {{"hidden_dim", gcn.hidden_dim},
        {"lr", gcn.lr},
        {"epochs", gcn.epochs},
        {"momentum", gcn.momentum}}},
      {"ctrl",
       {{"input", ctrl.input},
        {"hidden", ctrl.hidden},
        {"lr", ctrl.lr},
        {"epochs", ctrl.epochs},
        {"momentum", ctrl.momentum},
        {"delta_scale", ctrl.delta_scale},
        {"replace_params", ctrl.replace_params},
        {"resample_tasks", ctrl.resample_tasks}}},
      {"out_dir", out_dir},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("experiment config must be a JSON object");
  int id = 1;
  if (j.contains("experiment")) id = j.at("experiment").get<int>();
  ExperimentConfig cfg = defaults_for(id);

  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get("maze_size", cfg.maze_size);
    get("task_block_probs", cfg.task_block_probs);
    get("test_block_probs", cfg.test_block_probs);
    get("num_tasks", cfg.num_tasks);
    get("num_test_mazes", cfg.num_test_mazes);
    get("mask_q", cfg.mask_q);
    get("maze_seed", cfg.maze_seed);
    get("init_seed", cfg.init_seed);
    get("controller_seed", cfg.controller_seed);
    get("require_connected", cfg.require_connected);
    get("maze_metric", cfg.maze_metric);
    get("gaussian_dim", cfg.gaussian_dim);
    get("cross_size_normalize", cfg.cross_size_normalize);
    get("exp3_ctrl_block_probs", cfg.exp3_ctrl_block_probs);
    get("out_dir", cfg.out_dir);
    if (j.contains("exp3_studies")) {
      cfg.exp3_studies.clear();
      for (const auto& s : j.at("exp3_studies")) {
        cfg.exp3_studies.push_back({s.at("train_sizes").get<std::vector<int>>(),
                                    s.at("eval_sizes").get<std::vector<int>>()});
      }
    }
    if (j.contains("gcn")) {
      const auto& g = j.at("gcn");
      if (g.contains("hidden_dim")) cfg.gcn.hidden_dim = g.at("hidden_dim").get<int>();
      if (g.contains("lr")) cfg.gcn.lr = g.at("lr").get<double>();
      if (g.contains("epochs")) cfg.gcn.epochs = g.at("epochs").get<int>();
      if (g.contains("momentum")) cfg.gcn.momentum = g.at("momentum").get<double>();
    }
    if (j.contains("ctrl")) {
      const auto& c = j.at("ctrl");
      if (c.contains("input")) cfg.ctrl.input = c.at("input").get<std::string>();
      if (c.contains("hidden")) cfg.ctrl.hidden = c.at("hidden").get<std::vector<int>>();
      if (c.contains("lr")) cfg.ctrl.lr = c.at("lr").get<double>();
      if (c.contains("epochs")) cfg.ctrl.epochs = c.at("epochs").get<int>();
      if (c.contains("momentum")) cfg.ctrl.momentum = c.at("momentum").get<double>();
      if (c.contains("delta_scale")) cfg.ctrl.delta_scale = c.at("delta_scale").get<double>();
      if (c.contains("replace_params")) {
        cfg.ctrl.replace_params = c.at("replace_params").get<bool>();
      }
      if (c.contains("resample_tasks")) {
        cfg.ctrl.resample_tasks = c.at("resample_tasks").get<bool>();
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }

  static const std::vector<std::string> known{
      "experiment",      "maze_size",        "task_block_probs", "test_block_probs",
      "num_tasks",       "num_test_mazes",   "mask_q",           "maze_seed",
      "init_seed",       "controller_seed",  "require_connected", "maze_metric",
      "gaussian_dim",    "cross_size_normalize", "exp3_studies", "exp3_ctrl_block_probs",
      "gcn",             "ctrl",             "out_dir"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError("experiment config: unknown field '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::defaults_for(int experiment) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  switch (experiment) {
    case 1:
      break;
    case 2:
      cfg.ctrl.input = "enriched";
      break;
    case 3:
      cfg.gcn.lr = 0.05;
      cfg.gcn.epochs = 1500;
      cfg.ctrl.epochs = 100;
      break;
    case 4:
      break;
    case 5:
      cfg.gcn.lr = 1e-4;
      cfg.gcn.epochs = 4000;
      cfg.gcn.momentum = 0.9;
      cfg.ctrl.lr = 0.002;
      break;
    default:
      throw ContractError("experiment id must lie in 1..5");
  }
  return cfg;
}

void write_embeddings_csv(const std::string& path, const GridMaze& maze, const Tensor& latent) {
  auto out = open_out(path);
  out << "node_id,x,y";
  for (std::size_t k = 0; k < latent.cols(); ++k) out << ",z_" << k;
  out << '\n';
  for (int v = 0; v < maze.num_nodes(); ++v) {
    const auto [x, y] = maze.coords(v);
    out << v << ',' << x << ',' << y;
    for (std::size_t k = 0; k < latent.cols(); ++k) {
      out << ',' << format_double(latent.at(static_cast<std::size_t>(v), k));
    }
    out << '\n';
  }
}

void write_controller_loss_csv(const std::string& path, const ControllerTrace& trace) {
  auto out = open_out(path);
  out << "epoch,total_loss";
  const std::size_t tasks = trace.per_task.empty() ? 0 : trace.per_task.front().size();
  for (std::size_t t = 0; t < tasks; ++t) out << ",task_" << t;
  out << '\n';
  for (std::size_t e = 0; e < trace.total.size(); ++e) {
    out << e << ',' << format_double(trace.total[e]);
    for (std::size_t t = 0; t < tasks; ++t) out << ',' << format_double(trace.per_task[e][t]);
    out << '\n';
  }
}

void write_labels_csv(const std::string& path, const PathLabels& labels) {
  auto out = open_out(path);
  out << "node_id,label\n";
  for (std::size_t v = 0; v < labels.labels.size(); ++v) {
    out << v << ',' << labels.labels[v] << '\n';
  }
}

void write_values_csv(const std::string& path, const ValueTable& values) {
  auto out = open_out(path);
  out << "node_id,value\n";
  for (std::size_t v = 0; v < values.values.size(); ++v) {
    out << v << ',' << format_double(values.values[v]) << '\n';
  }
}

json run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  const auto started = std::chrono::steady_clock::now();

  json report;
  report["schema"] = 1;
  report["experiment"] = config.experiment;
  report["config"] = config.to_json();

  json body;
  switch (config.experiment) {
    case 1:
    case 2: body = run_experiment_1_or_2(config, out_dir); break;
    case 3: body = run_experiment_3(config, out_dir); break;
    case 4: body = run_experiment_4(config, out_dir); break;
    case 5: body = run_experiment_5(config, out_dir); break;
    default: throw ContractError("experiment id must lie in 1..5");
  }
  for (auto& [key, value] : body.items()) report[key] = std::move(value);

  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
  report["timing"] = {{"wall_clock_seconds", elapsed.count()}};

  if (!out_dir.empty()) {
    auto out = open_out(out_dir + "/report.json");
    out << report.dump(2) << '\n';
  }
  return report;
}

}  // namespace mazeadapt
