#include "amwc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace amwc {

double GroundTruth::threshold(int cls) const {
  if (cls < 1 || cls >= (int)area_threshold.size() || area_threshold[cls] <= 0.0)
    throw std::runtime_error("missing area threshold for class " + std::to_string(cls));
  return area_threshold[cls];
}

std::vector<std::string> validate_graph(const CostGraph& g) {
  std::vector<std::string> errs;
  if (g.num_nodes <= 0) errs.push_back("num_nodes must be positive");
  if (g.num_classes <= 0) errs.push_back("num_classes must be positive");
  if (g.node_costs.size() != (size_t)g.num_nodes * g.num_classes)
    errs.push_back("node cost table has wrong shape");
  if (g.edge_costs.size() != g.edges.size())
    errs.push_back("edge cost vector has wrong length");
  if (g.partitionable.size() != (size_t)g.num_classes + 1)
    errs.push_back("partitionable mask has wrong length");

  for (size_t e = 0; e < g.edges.size(); ++e) {
    auto [i, j] = g.edges[e];
    if (i == j) errs.push_back("self-loop at edge " + std::to_string(e));
    if (i > j) errs.push_back("edge endpoints not ordered at edge " + std::to_string(e));
    if (i < 0 || j < 0 || i >= g.num_nodes || j >= g.num_nodes)
      errs.push_back("index out of range at edge " + std::to_string(e));
    if (e > 0 && !(g.edges[e - 1] < g.edges[e])) {
      if (g.edges[e - 1] == g.edges[e])
        errs.push_back("duplicate edge at edge " + std::to_string(e));
      else
        errs.push_back("edges not sorted at edge " + std::to_string(e));
    }
  }
  for (double c : g.node_costs)
    if (!std::isfinite(c)) {
      errs.push_back("non-finite cost in node costs");
      break;
    }
  for (double c : g.edge_costs)
    if (!std::isfinite(c)) {
      errs.push_back("non-finite cost in edge costs");
      break;
    }
  return errs;
}

std::vector<std::string> validate_ground_truth(const GroundTruth& gt) {
  std::vector<std::string> errs;
  int s = gt.num_segments();
  for (size_t i = 0; i < gt.segment_id.size(); ++i)
    if (gt.segment_id[i] < 1 || gt.segment_id[i] > s) {
      errs.push_back("segment id out of range at node " + std::to_string(i));
      break;
    }
  for (int c : gt.segment_class)
    if (c < 1) {
      errs.push_back("segment class out of range");
      break;
    }
  for (int c : gt.segment_class) {
    if (c >= 1 && c < (int)gt.area_threshold.size() && gt.area_threshold[c] > 0.0) continue;
    errs.push_back("missing or non-positive area threshold for class " + std::to_string(c));
    break;
  }
  return errs;
}

std::vector<std::string> check_labeling(const CostGraph& g, const Labeling& lab) {
  std::vector<std::string> errs;
  if ((int)lab.node_class.size() != g.num_nodes || (int)lab.segment_id.size() != g.num_nodes ||
      lab.edge_cut.size() != g.edges.size()) {
    errs.push_back("labeling shape mismatch");
    return errs;
  }
  int j = lab.num_segments();
  for (int i = 0; i < g.num_nodes; ++i) {
    if (lab.node_class[i] < 1 || lab.node_class[i] > g.num_classes) {
      errs.push_back("class id out of range at node " + std::to_string(i));
      return errs;
    }
    if (lab.segment_id[i] < 1 || lab.segment_id[i] > j) {
      errs.push_back("segment id out of range at node " + std::to_string(i));
      return errs;
    }
  }

  for (size_t e = 0; e < g.edges.size(); ++e) {
    auto [a, b] = g.edges[e];
    bool cut = lab.edge_cut[e] != 0;
    bool diff_seg = lab.segment_id[a] != lab.segment_id[b];
    if (cut != diff_seg)
      errs.push_back("cut indicator inconsistent with segments at edge " + std::to_string(e));
    int xa = lab.node_class[a], xb = lab.node_class[b];
    if (xa == xb && !g.is_partitionable(xa) && cut)
      errs.push_back("internal cut in non-partitionable class at edge " + std::to_string(e));
    if (xa != xb && !cut)
      errs.push_back("uncut edge across class boundary at edge " + std::to_string(e));
  }

  for (int i = 0; i < g.num_nodes; ++i)
    if (lab.node_class[i] != lab.segment_class[lab.segment_id[i] - 1]) {
      errs.push_back("node class differs from segment class at node " + std::to_string(i));
      break;
    }

  // at most one segment per non-partitionable class, counting only segments
  // that actually contain nodes
  std::vector<char> seen(j + 1, 0);
  for (int i = 0; i < g.num_nodes; ++i) seen[lab.segment_id[i]] = 1;
  std::map<int, int> count;
  for (int s = 1; s <= j; ++s)
    if (seen[s]) count[lab.segment_class[s - 1]]++;
  for (auto [cls, n] : count)
    if (cls <= g.num_classes && !g.is_partitionable(cls) && n > 1)
      errs.push_back("multiple segments for non-partitionable class " + std::to_string(cls));

  return errs;
}

bool is_feasible(const CostGraph& g, const Labeling& lab) {
  return check_labeling(g, lab).empty();
}

double objective_value(const CostGraph& g, const Labeling& lab) {
  double obj = 0.0;
  for (int i = 0; i < g.num_nodes; ++i) obj += g.node_cost(i, lab.node_class[i]);
  for (size_t e = 0; e < g.edges.size(); ++e)
    if (lab.edge_cut[e]) obj += g.edge_costs[e];
  return obj;
}

double objective(const CostGraph& g, const Labeling& lab) {
  auto errs = check_labeling(g, lab);
  if (!errs.empty()) throw std::invalid_argument("constraint violation: " + errs.front());
  return objective_value(g, lab);
}

void canonicalize_segments(std::vector<int>& z, std::vector<int>& m) {
  std::vector<int> remap(m.size() + 1, 0);
  std::vector<int> new_m;
  int next = 0;
  for (int& s : z) {
    if (remap[s] == 0) {
      remap[s] = ++next;
      new_m.push_back(m[s - 1]);
    }
    s = remap[s];
  }
  m = std::move(new_m);
}

Labeling labeling_from_segments(const CostGraph& g, std::vector<int> z, std::vector<int> m) {
  Labeling lab;
  lab.segment_id = std::move(z);
  lab.segment_class = std::move(m);
  lab.node_class.resize(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i)
    lab.node_class[i] = lab.segment_class[lab.segment_id[i] - 1];
  lab.edge_cut.resize(g.edges.size());
  for (size_t e = 0; e < g.edges.size(); ++e) {
    auto [a, b] = g.edges[e];
    lab.edge_cut[e] = lab.segment_id[a] != lab.segment_id[b] ? 1 : 0;
  }
  lab.objective = objective_value(g, lab);
  return lab;
}

std::vector<std::pair<int, int>> grid_graph(int height, int width,
                                            const std::vector<int>& distances) {
  std::vector<std::pair<int, int>> edges;
  std::set<int> ds(distances.begin(), distances.end());
  for (int d : ds) {
    if (d < 1) throw std::invalid_argument("grid distance must be >= 1");
    for (int r = 0; r < height; ++r)
      for (int c = 0; c + d < width; ++c)
        edges.emplace_back(r * width + c, r * width + c + d);
    for (int r = 0; r + d < height; ++r)
      for (int c = 0; c < width; ++c)
        edges.emplace_back(r * width + c, (r + d) * width + c);
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<int> gt_node_classes(const GroundTruth& gt) {
  std::vector<int> x(gt.segment_id.size());
  for (size_t i = 0; i < x.size(); ++i) x[i] = gt.segment_class[gt.segment_id[i] - 1];
  return x;
}

std::vector<uint8_t> gt_edge_cuts(const CostGraph& g, const GroundTruth& gt) {
  std::vector<uint8_t> y(g.edges.size());
  for (size_t e = 0; e < g.edges.size(); ++e) {
    auto [a, b] = g.edges[e];
    y[e] = gt.segment_id[a] != gt.segment_id[b] ? 1 : 0;
  }
  return y;
}

}  // namespace amwc
