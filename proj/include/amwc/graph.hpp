#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace amwc {

// Asymmetric multiway cut instance. Class ids are 1-based (1..num_classes),
// matching the text formats. A positive edge cost penalizes cutting the edge
// (attractive); a negative one rewards it (repulsive). Classes listed in
// `partitionable` may split into several segments, all others form at most
// one segment each.
//
// Instances are immutable after construction and safe to share across
// threads read-only.
struct CostGraph {
  int num_nodes = 0;
  int num_classes = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted lexicographically, unique
  std::vector<double> node_costs;          // row-major num_nodes x num_classes
  std::vector<double> edge_costs;          // one per edge
  std::vector<uint8_t> partitionable;      // size num_classes + 1, indexed by class id

  double node_cost(int node, int cls) const {
    return node_costs[(size_t)node * num_classes + (cls - 1)];
  }
  double& node_cost(int node, int cls) {
    return node_costs[(size_t)node * num_classes + (cls - 1)];
  }
  bool is_partitionable(int cls) const { return partitionable[cls] != 0; }
  int num_edges() const { return (int)edges.size(); }
};

// A solution: per-node class x, per-edge cut flag y, per-node segment id z
// (dense 1..J in order of first node occurrence) and segment -> class map m.
struct Labeling {
  std::vector<int> node_class;     // x, values in 1..K
  std::vector<uint8_t> edge_cut;   // y
  std::vector<int> segment_id;     // z, values in 1..J
  std::vector<int> segment_class;  // m; segment s has class segment_class[s-1]
  double objective = 0.0;

  int num_segments() const { return (int)segment_class.size(); }
};

// Reference segmentation plus per-class area thresholds used by the soft
// metric's small-prediction rejection.
struct GroundTruth {
  std::vector<int> segment_id;         // per node, 1..S
  std::vector<int> segment_class;      // segment s -> class, at [s-1]
  std::vector<double> area_threshold;  // indexed by class id; 0 = unset

  int num_segments() const { return (int)segment_class.size(); }
  double threshold(int cls) const;  // throws if unset for cls
};

// Empty result means valid; otherwise one entry per violation.
std::vector<std::string> validate_graph(const CostGraph& g);
std::vector<std::string> validate_ground_truth(const GroundTruth& gt);

// Feasibility of a labeling against an instance: cut flags consistent with
// segments, no internal cut in a non-partitionable class, every class
// boundary cut, node classes matching segment classes, and at most one
// segment per non-partitionable class.
std::vector<std::string> check_labeling(const CostGraph& g, const Labeling& lab);
bool is_feasible(const CostGraph& g, const Labeling& lab);

// Sum of selected node costs plus costs of cut edges. objective() rejects
// infeasible labelings; objective_value() does not check.
double objective_value(const CostGraph& g, const Labeling& lab);
double objective(const CostGraph& g, const Labeling& lab);

// Builds x, y and the objective from segments z (values 1..J) and segment
// classes m. z need not be in first-occurrence order here.
Labeling labeling_from_segments(const CostGraph& g, std::vector<int> z, std::vector<int> m);

// Renumbers segments to dense 1..J in order of first node occurrence.
void canonicalize_segments(std::vector<int>& z, std::vector<int>& m);

// Horizontal and vertical grid edges at the given distances; node (r,c) has
// index r*width + c. Pairs falling outside the grid are skipped.
std::vector<std::pair<int, int>> grid_graph(int height, int width,
                                            const std::vector<int>& distances);

// Per-node class labels implied by the ground truth segments.
std::vector<int> gt_node_classes(const GroundTruth& gt);
// Per-edge cut flags implied by the ground truth segments.
std::vector<uint8_t> gt_edge_cuts(const CostGraph& g, const GroundTruth& gt);

}  // namespace amwc
