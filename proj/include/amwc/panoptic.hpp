#pragma once

#include <cstdint>
#include <vector>

#include "amwc/graph.hpp"

namespace amwc {

struct MatchedPair {
  int pred, gt;  // segment ids
  double iou;
};

struct ClassMatches {
  int cls;
  std::vector<MatchedPair> matches;  // TP
  std::vector<int> unmatched_pred;   // FP
  std::vector<int> unmatched_gt;     // FN
};

// Per-class matching between predicted and reference segments. `soft` marks
// a maximum-weight matching (no 0.5 cutoff); pairs with zero overlap are
// never matched. Classes appear in ascending id order.
struct MatchSet {
  bool soft = false;
  std::vector<ClassMatches> by_class;
};

// Loss gradient with respect to per-node membership in each predicted
// segment, row-major num_nodes x num_segments.
struct SegmentGradient {
  int num_nodes = 0, num_segments = 0;
  std::vector<double> d;

  double at(int node, int seg) const { return d[(size_t)node * num_segments + (seg - 1)]; }
  double& at(int node, int seg) { return d[(size_t)node * num_segments + (seg - 1)]; }
  bool all_zero() const;
};

// Soft membership of every node in every predicted segment, row-major.
// The binary case is memberships in {0,1} with exactly one 1 per row.
struct RelaxedMasks {
  int num_nodes = 0, num_segments = 0;
  std::vector<double> membership;
  std::vector<int> segment_class;  // class of segment s at [s-1]

  double at(int node, int seg) const { return membership[(size_t)node * num_segments + (seg - 1)]; }
  double& at(int node, int seg) { return membership[(size_t)node * num_segments + (seg - 1)]; }
};
RelaxedMasks binary_masks(const std::vector<int>& z_pred, const std::vector<int>& pred_class);

// |p and g| / |p or g|; 0 for an empty prediction. Throws on length mismatch.
double iou(const std::vector<uint8_t>& p, const std::vector<uint8_t>& g);

MatchSet match_hard(const std::vector<int>& z_pred, const std::vector<int>& pred_class,
                    const GroundTruth& gt);
MatchSet match_soft(const std::vector<int>& z_pred, const std::vector<int>& pred_class,
                    const GroundTruth& gt);

// Maximum-weight bipartite matching on an explicit weight matrix
// (row-major n_pred x n_gt); entries <= 0 are never matched. Ties prefer the
// lexicographically smallest (pred, gt) pair list. Indices are 0-based rows
// and columns.
std::vector<std::pair<int, int>> max_weight_matching(int n_pred, int n_gt,
                                                     const std::vector<double>& weights);

struct ClassPq {
  int cls = 0;
  double pq = 0.0;
  double sq = 0.0;  // mean IoU over matched pairs
  int tp = 0, fp = 0, fn = 0;
};

struct PqResult {
  double mean = 0.0;  // over classes present on either side; 1 if none
  std::vector<ClassPq> per_class;
};
PqResult pq_exact(const std::vector<int>& z_pred, const std::vector<int>& pred_class,
                  const GroundTruth& gt);

// h(u) = u^4 / (u^4 + (1-u)^4), the smooth stand-in for the 0.5 cutoff.
double soft_threshold(double u);
double soft_threshold_grad(double u);

// 1 / (1 + exp(-0.1 (area - t))): small-segment rejection weight.
double area_sigmoid(double area, double t);

struct SurrogateResult {
  double mean = 0.0;
  std::vector<std::pair<int, double>> per_class;  // (class, value)
  MatchSet match;
};
SurrogateResult pq_surrogate(const std::vector<int>& z_pred, const std::vector<int>& pred_class,
                             const GroundTruth& gt);

struct SurrogateGradOptions {
  double iou_path_scale = 1.0;  // diagnostic hook; 1.0 in normal use
};

// Gradient of loss_scale * (1 - mean surrogate PQ) w.r.t. segment
// memberships, with the matching held fixed. The relaxed overload evaluates
// the same closed form at arbitrary membership values.
SegmentGradient pq_surrogate_grad(const std::vector<int>& z_pred,
                                  const std::vector<int>& pred_class, const GroundTruth& gt,
                                  const MatchSet& match, double loss_scale,
                                  const SurrogateGradOptions& opts = {});
SegmentGradient pq_surrogate_grad_relaxed(const RelaxedMasks& masks, const GroundTruth& gt,
                                          const MatchSet& match, double loss_scale,
                                          const SurrogateGradOptions& opts = {});

// Confidence score for one predicted segment: mean node cost of its class
// over the mask, plus the mean edge cost over boundary edges, minus the mean
// edge cost over edges internal to the mask. Empty edge sets contribute 0.
double instance_score(const std::vector<uint8_t>& mask, int cls, const CostGraph& g);

}  // namespace amwc
