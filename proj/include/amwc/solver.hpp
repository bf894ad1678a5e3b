#pragma once

#include <span>
#include <utility>
#include <vector>

#include "amwc/graph.hpp"

namespace amwc {

// Instrumentation for tests: one record per executed merge, with the relaxed
// objective (current clusters, every inter-cluster edge cut) after it.
struct MergeRecord {
  double t;
  double objective_after;
};
struct SolveTrace {
  double initial_objective = 0.0;
  std::vector<MergeRecord> merges;
  double final_objective = 0.0;  // of the returned feasible labeling
};

// Similarity of a candidate merge, on accumulated cluster quantities.
// cost_i/cost_j are the per-class accumulated node costs of the two clusters
// (length K, class k at [k-1]); class_i/class_j their current labels.
// Returns (t, joint class); ties in the joint class go to the smallest id.
std::pair<double, int> edge_similarity(std::span<const double> cost_i,
                                       std::span<const double> cost_j, double edge_cost,
                                       int class_i, int class_j);

// Greedy edge contraction: repeatedly merges the highest-similarity cluster
// pair while t >= 0, then merges all clusters sharing a non-partitionable
// class. Deterministic: equal-t candidates are ordered by their cluster
// representative pair.
Labeling solve(const CostGraph& g, SolveTrace* trace = nullptr);

// Same, ignoring the instance's partitionable set (every class forms at most
// one segment).
Labeling solve_mwc(const CostGraph& g, SolveTrace* trace = nullptr);

}  // namespace amwc
