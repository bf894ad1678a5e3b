#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amwc/blackbox.hpp"
#include "amwc/graph.hpp"
#include "amwc/panoptic.hpp"
#include "amwc/rng.hpp"

namespace amwc {

// Seeded generators shared by the check suites and tests.
struct RandomInstanceOptions {
  int max_nodes = 30;
  int max_classes = 4;
  double edge_factor = 2.5;     // expected edges per node
  double cost_lo = -1.0, cost_hi = 1.0;
  bool random_partitionable = true;
};
CostGraph random_instance(Rng& rng, const RandomInstanceOptions& opt = {});

// Attractive edges and one class that minimizes every node's cost; greedy
// contraction is exact on these.
CostGraph random_dominant_instance(Rng& rng, int max_nodes, int max_classes);

GroundTruth random_ground_truth(Rng& rng, int num_nodes, int max_segments, int max_classes);
RelaxedMasks random_relaxed_masks(Rng& rng, int num_nodes, int max_segments, int max_classes);

// Straightforward evaluation of the soft metric at arbitrary memberships
// with a fixed matching. Written independently of the analytic gradient so
// finite differences of this value check that code path.
double relaxed_surrogate_value(const RelaxedMasks& masks, const GroundTruth& gt,
                               const MatchSet& match);
double relaxed_surrogate_loss(const RelaxedMasks& masks, const GroundTruth& gt,
                              const MatchSet& match, double loss_scale);

// Central finite differences of the relaxed loss, entry by entry.
SegmentGradient finite_difference_grad(const RelaxedMasks& masks, const GroundTruth& gt,
                                       const MatchSet& match, double loss_scale, double step);

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  std::string detail;
};

struct CheckOptions {
  uint64_t seed = 1;
  int fd_instances = 20;
  int zero_grad_instances = 25;
  int feasibility_instances = 100;
  int oracle_nodes = 6;  // > 10 triggers the oracle size limit
  PerturbConfig perturb{1.0, 5.0, 3, 7, false, 1};
  SurrogateGradOptions grad_opts{};  // hook for fault injection
};

// Gradient and metric invariant checks on seeded random inputs.
std::vector<CheckResult> run_gradient_checks(const CheckOptions& opt);

}  // namespace amwc
