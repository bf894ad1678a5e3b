#include "amwc/solver.hpp"

#include <cstdint>
#include <map>
#include <queue>

namespace amwc {

std::pair<double, int> edge_similarity(std::span<const double> cost_i,
                                       std::span<const double> cost_j, double edge_cost,
                                       int class_i, int class_j) {
  int k_best = 1;
  double s = cost_i[0] + cost_j[0];
  for (size_t k = 1; k < cost_i.size(); ++k) {
    double v = cost_i[k] + cost_j[k];
    if (v < s) {
      s = v;
      k_best = (int)k + 1;
    }
  }
  double m = edge_cost + cost_i[class_i - 1] + cost_j[class_j - 1];
  return {m - s, k_best};
}

namespace {

struct Candidate {
  double t;
  int a, b;  // cluster representatives, a < b
  uint32_t va, vb;
  int joint_class;
};

struct CandidateOrder {
  // max-heap on t; equal t -> smallest (a, b) pair first
  bool operator()(const Candidate& x, const Candidate& y) const {
    if (x.t != y.t) return x.t < y.t;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  }
};

class Contraction {
 public:
  Contraction(const CostGraph& g, bool ignore_partitionable)
      : g_(g), ignore_p_(ignore_partitionable), parent_(g.num_nodes),
        version_(g.num_nodes, 0), cls_(g.num_nodes), adj_(g.num_nodes),
        costs_(g.node_costs) {
    for (int i = 0; i < g.num_nodes; ++i) {
      parent_[i] = i;
      int best = 1;
      for (int k = 2; k <= g.num_classes; ++k)
        if (g.node_cost(i, k) < g.node_cost(i, best)) best = k;
      cls_[i] = best;
    }
    for (size_t e = 0; e < g_.edges.size(); ++e) {
      auto [i, j] = g_.edges[e];
      if (i == j) continue;  // self-loops never enter the queue
      adj_[i][j] += g_.edge_costs[e];
      adj_[j][i] += g_.edge_costs[e];
    }
    for (int i = 0; i < g_.num_nodes; ++i)
      for (auto& [j, c] : adj_[i])
        if (i < j) push_candidate(i, j, c);
  }

  int find(int i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  // Objective of the current cluster state (every inter-cluster edge cut),
  // recomputed from the original instance. Trace consumers rely on this
  // being independent of the similarity bookkeeping.
  double relaxed_objective() {
    double obj = 0.0;
    for (int i = 0; i < g_.num_nodes; ++i) obj += g_.node_cost(i, cls_[find(i)]);
    for (size_t e = 0; e < g_.edges.size(); ++e) {
      auto [i, j] = g_.edges[e];
      if (find(i) != find(j)) obj += g_.edge_costs[e];
    }
    return obj;
  }

  void run(SolveTrace* trace) {
    if (trace) trace->initial_objective = relaxed_objective();
    while (!queue_.empty()) {
      Candidate c = queue_.top();
      queue_.pop();
      if (find(c.a) != c.a || find(c.b) != c.b) continue;
      if (version_[c.a] != c.va || version_[c.b] != c.vb) continue;
      if (c.t < 0.0) break;
      merge(c.a, c.b, c.joint_class);
      if (trace) trace->merges.push_back({c.t, relaxed_objective()});
    }
    if (!ignore_p_) {
      merge_single_segment_classes([&](int cls) { return !g_.is_partitionable(cls); });
    } else {
      merge_single_segment_classes([](int) { return true; });
    }
  }

  Labeling build_labeling() {
    std::vector<int> z(g_.num_nodes), m;
    std::vector<int> seg_of_root(g_.num_nodes, 0);
    int next = 0;
    for (int i = 0; i < g_.num_nodes; ++i) {
      int r = find(i);
      if (seg_of_root[r] == 0) {
        seg_of_root[r] = ++next;
        m.push_back(cls_[r]);
      }
      z[i] = seg_of_root[r];
    }
    return labeling_from_segments(g_, std::move(z), std::move(m));
  }

 private:
  void push_candidate(int a, int b, double edge_cost) {
    std::span<const double> ca(&costs_[(size_t)a * g_.num_classes], g_.num_classes);
    std::span<const double> cb(&costs_[(size_t)b * g_.num_classes], g_.num_classes);
    auto [t, k] = edge_similarity(ca, cb, edge_cost, cls_[a], cls_[b]);
    if (a > b) std::swap(a, b);
    queue_.push({t, a, b, version_[a], version_[b], k});
  }

  void merge(int a, int b, int joint_class) {
    // the smaller representative survives; a < b by construction
    int s = a, d = b;
    parent_[d] = s;
    for (int k = 0; k < g_.num_classes; ++k)
      costs_[(size_t)s * g_.num_classes + k] += costs_[(size_t)d * g_.num_classes + k];
    cls_[s] = joint_class;
    version_[s]++;
    adj_[s].erase(d);
    for (auto& [h, c] : adj_[d]) {
      if (h == s) continue;
      adj_[s][h] += c;  // parallel edges created by contraction sum up
      adj_[h].erase(d);
      adj_[h][s] = adj_[s][h];
    }
    adj_[d].clear();
    // the surviving cluster's costs and label changed, so every incident
    // similarity is stale; recompute and re-push them all
    for (auto& [h, c] : adj_[s]) push_candidate(s, h, c);
  }

  template <typename Pred>
  void merge_single_segment_classes(Pred&& must_merge) {
    std::map<int, int> first_of_class;
    for (int i = 0; i < g_.num_nodes; ++i) {
      int r = find(i);
      if (r != i) continue;
      if (!must_merge(cls_[r])) continue;
      auto [it, inserted] = first_of_class.try_emplace(cls_[r], r);
      if (!inserted) parent_[r] = it->second;
    }
  }

  const CostGraph& g_;
  bool ignore_p_;
  std::vector<int> parent_;
  std::vector<uint32_t> version_;
  std::vector<int> cls_;
  std::vector<std::map<int, double>> adj_;
  std::vector<double> costs_;  // accumulated per-cluster node costs
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> queue_;
};

Labeling run_solver(const CostGraph& g, bool ignore_partitionable, SolveTrace* trace) {
  Contraction st(g, ignore_partitionable);
  st.run(trace);
  Labeling lab = st.build_labeling();
  if (trace) trace->final_objective = lab.objective;
  return lab;
}

}  // namespace

Labeling solve(const CostGraph& g, SolveTrace* trace) { return run_solver(g, false, trace); }

Labeling solve_mwc(const CostGraph& g, SolveTrace* trace) { return run_solver(g, true, trace); }

}  // namespace amwc
