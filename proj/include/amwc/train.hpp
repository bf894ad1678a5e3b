#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amwc/blackbox.hpp"
#include "amwc/graph.hpp"

namespace amwc {

// Grid segmentation problem with per-node and per-edge features and a known
// reference labeling. Node features are a noisy one-hot encoding of the
// reference class; edge features carry a noisy +1 (same reference segment)
// or -1 (different) in the slot of their distance band.
struct SyntheticTask {
  int height = 0, width = 0;
  CostGraph skeleton;  // edges, classes, partitionable set; costs all zero
  int node_feat_dim = 0, edge_feat_dim = 0;
  std::vector<double> node_features;  // num_nodes x node_feat_dim
  std::vector<double> edge_features;  // num_edges x edge_feat_dim
  GroundTruth gt;
};

// distance bands used for task grids
inline const std::vector<int> kTaskDistances = {1, 4};

// Thing classes are 1..thing_classes (partitionable), stuff classes follow.
// Rectangles of thing classes are placed over horizontal stuff bands; later
// rectangles occlude earlier ones, and layouts that hide an instance
// completely are retried a bounded number of times.
SyntheticTask gen_task(uint64_t seed, int height, int width, int num_instances,
                       int thing_classes, int stuff_classes, double noise);

// Linear map from features to solver costs; the trainable model.
struct LinearCostModel {
  int num_classes = 0, node_feat_dim = 0, edge_feat_dim = 0;
  std::vector<double> w_node;  // num_classes x node_feat_dim
  std::vector<double> b_node;  // num_classes
  std::vector<double> w_edge;  // edge_feat_dim
  double b_edge = 0.0;

  static LinearCostModel zeros(int num_classes, int node_feat_dim, int edge_feat_dim);
  // Recovers the reference labeling exactly on noiseless tasks.
  static LinearCostModel identity(int num_classes, int edge_feat_dim);
  // identity scaled by `damp` on the node side, zero edge weights.
  static LinearCostModel damped(int num_classes, int edge_feat_dim, double damp);

  void apply(const SyntheticTask& task, std::vector<double>& node_costs,
             std::vector<double>& edge_costs) const;
  CostGraph instantiate(const SyntheticTask& task) const;  // skeleton + costs
};

std::string serialize_model(const LinearCostModel& m);
LinearCostModel parse_model_text(const std::string& text);

struct DropoutMask {
  std::vector<uint8_t> node, edge;  // 1 = entry was zeroed
};
// Sets exactly floor(rate * count) entries of each tensor to zero, chosen
// uniformly without replacement; no rescaling of the survivors.
DropoutMask cost_dropout(std::vector<double>& node_costs, std::vector<double>& edge_costs,
                         double rate, uint64_t seed);

enum class LossKind { surrogate, node, edge };

struct TrainConfig {
  PerturbConfig perturb{1.0, 50.0, 5, 0, false, 1};
  double loss_scale = 10.0;  // w
  double learning_rate = 0.05;
  int iterations = 100;
  int batch_size = 8;
  double dropout = 0.0;  // D
  uint64_t seed = 0;
  LossKind loss = LossKind::surrogate;
  bool adam = false;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  int workers = 1;
};

struct TrainLogEntry {
  int iter = 0;
  double loss = 0.0;
  double pq_train = 0.0;
  double pq_eval = 0.0;
};
std::string format_log_entry(const TrainLogEntry& e);

struct TrainResult {
  LinearCostModel model;
  std::vector<TrainLogEntry> log;
};

// Gradient descent through the solver. Per iteration: model -> costs ->
// dropout -> solve -> loss, then the perturbation estimate of the cost
// gradient chained through the linear model. pq_eval is the mean exact PQ
// on eval_tasks (without dropout); nan if eval_tasks is empty.
TrainResult train(const std::vector<SyntheticTask>& tasks,
                  const std::vector<SyntheticTask>& eval_tasks, LinearCostModel model,
                  const TrainConfig& cfg);

// Full-batch descent on mean per-node cross-entropy of softmax(-node costs)
// against the reference classes; no solver involved.
LinearCostModel pretrain_cross_entropy(const std::vector<SyntheticTask>& tasks,
                                       LinearCostModel model, int iterations, double lr);
double cross_entropy_loss(const std::vector<SyntheticTask>& tasks, const LinearCostModel& model);

Labeling solve_task(const SyntheticTask& task, const LinearCostModel& model);
double mean_exact_pq(const std::vector<SyntheticTask>& tasks, const LinearCostModel& model,
                     int workers = 1);

}  // namespace amwc
