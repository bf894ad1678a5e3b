#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amwc/graph.hpp"
#include "amwc/panoptic.hpp"

namespace amwc {

// Gradient of a scalar loss with respect to the solver's input costs.
// Entries are differences of indicator solutions divided by the
// perturbation magnitude, so before averaging each lies in {-1/l, 0, +1/l}.
struct CostGradient {
  std::vector<double> d_node;  // num_nodes x num_classes, row-major
  std::vector<double> d_edge;  // per edge

  void accumulate(const CostGradient& other, double weight);
};

struct PerturbConfig {
  double lambda_min = 1.0;
  double lambda_max = 1.0;
  int num_samples = 1;  // N
  uint64_t seed = 0;
  // When set, unmatched reference segments are appended as extra label slots
  // (with zero incoming gradient) in the relabeling solve.
  bool lift_unmatched_gt = false;
  int workers = 1;
};

// The perturbation magnitudes used by the robust estimator: num_samples
// values drawn uniformly from [lambda_min, lambda_max], derived from seed.
std::vector<double> sample_lambdas(const PerturbConfig& cfg);

// Single-magnitude estimator for a loss on panoptic labels. Builds a
// relabeling problem with one label slot per predicted segment (plus
// extra_classes, which carry no gradient), node costs
// c(i, slot) = node_cost(i, class(slot)) + lambda * dz(i, slot), the
// original edge costs, and every slot restricted to a single segment.
// Returns (onehot(x') - onehot(x)) / lambda and (y' - y) / lambda.
// An all-zero dz yields exactly zero gradients.
CostGradient backward_panoptic(const CostGraph& g, const Labeling& fwd, const SegmentGradient& dz,
                               double lambda, std::span<const int> extra_classes = {});

// Mean of num_samples single-magnitude estimates; samples may be solved in
// parallel, reduction is in sample order.
CostGradient backward_robust(const CostGraph& g, const Labeling& fwd, const SegmentGradient& dz,
                             const PerturbConfig& cfg, std::span<const int> extra_classes = {});

// Lower-level estimators: perturb node (edge) costs by lambda * grad,
// re-solve the same instance, return the solution differences.
CostGradient backward_perturb_node(const CostGraph& g, const Labeling& fwd,
                                   std::span<const double> node_grad, double lambda);
CostGradient backward_perturb_edge(const CostGraph& g, const Labeling& fwd,
                                   std::span<const double> edge_grad, double lambda);

// Losses applied directly to the solver output instead of panoptic labels:
// mean absolute one-hot difference on node classes, and the F1 complement
// on edge cut flags.
double node_loss(const Labeling& fwd, std::span<const int> x_gt);
double edge_loss(const Labeling& fwd, std::span<const uint8_t> y_gt);
std::vector<double> node_loss_grad(const Labeling& fwd, std::span<const int> x_gt,
                                   int num_classes, double scale = 1.0);
std::vector<double> edge_loss_grad(const Labeling& fwd, std::span<const uint8_t> y_gt,
                                   double scale = 1.0);

CostGradient backward_node_loss(const CostGraph& g, const Labeling& fwd,
                                std::span<const int> x_gt, double lambda, double scale = 1.0);
CostGradient backward_edge_loss(const CostGraph& g, const Labeling& fwd,
                                std::span<const uint8_t> y_gt, double lambda, double scale = 1.0);
CostGradient backward_node_loss_robust(const CostGraph& g, const Labeling& fwd,
                                       std::span<const int> x_gt, const PerturbConfig& cfg,
                                       double scale = 1.0);
CostGradient backward_edge_loss_robust(const CostGraph& g, const Labeling& fwd,
                                       std::span<const uint8_t> y_gt, const PerturbConfig& cfg,
                                       double scale = 1.0);

}  // namespace amwc
