#include "amwc/exact_oracle.hpp"

#include <limits>
#include <stdexcept>

namespace amwc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimal-cost class per block subject to "non-partitionable classes used at
// most once", by DP over (block, used-class mask). Ties prefer the smaller
// class at the earlier block, so the result is deterministic.
// Returns infinity if no feasible assignment exists.
double assign_classes(const std::vector<std::vector<double>>& block_cost, const CostGraph& g,
                      std::vector<int>& classes_out) {
  int m = (int)block_cost.size();
  int k = g.num_classes;
  int masks = 1 << k;
  // best[b][mask]: minimal cost of assigning blocks b..m-1 when `mask` marks
  // non-partitionable classes already taken
  std::vector<std::vector<double>> best(m + 1, std::vector<double>(masks, kInf));
  for (int mask = 0; mask < masks; ++mask) best[m][mask] = 0.0;
  for (int b = m - 1; b >= 0; --b) {
    for (int mask = 0; mask < masks; ++mask) {
      double v = kInf;
      for (int cls = 1; cls <= k; ++cls) {
        int bit = 1 << (cls - 1);
        if (!g.is_partitionable(cls)) {
          if (mask & bit) continue;
          double c = block_cost[b][cls - 1] + best[b + 1][mask | bit];
          if (c < v) v = c;
        } else {
          double c = block_cost[b][cls - 1] + best[b + 1][mask];
          if (c < v) v = c;
        }
      }
      best[b][mask] = v;
    }
  }
  if (best[0][0] == kInf) return kInf;

  classes_out.assign(m, 0);
  int mask = 0;
  for (int b = 0; b < m; ++b) {
    for (int cls = 1; cls <= k; ++cls) {
      int bit = 1 << (cls - 1);
      if (!g.is_partitionable(cls)) {
        if (mask & bit) continue;
        if (block_cost[b][cls - 1] + best[b + 1][mask | bit] == best[b][mask]) {
          classes_out[b] = cls;
          mask |= bit;
          break;
        }
      } else if (block_cost[b][cls - 1] + best[b + 1][mask] == best[b][mask]) {
        classes_out[b] = cls;
        break;
      }
    }
  }
  return best[0][0];
}

}  // namespace

Labeling brute_force(const CostGraph& g) {
  if (g.num_nodes > kOracleMaxNodes || g.num_classes > kOracleMaxClasses)
    throw std::runtime_error("oracle size limit");

  int n = g.num_nodes;
  // restricted growth strings enumerate set partitions in canonical order:
  // block ids are assigned by first node occurrence
  std::vector<int> rgs(n, 0);
  double best_obj = kInf;
  std::vector<int> best_rgs, best_classes;

  std::vector<std::vector<double>> block_cost;
  std::vector<int> classes;

  while (true) {
    int num_blocks = 0;
    for (int v : rgs) num_blocks = std::max(num_blocks, v + 1);

    double edge_obj = 0.0;
    for (size_t e = 0; e < g.edges.size(); ++e) {
      auto [i, j] = g.edges[e];
      if (rgs[i] != rgs[j]) edge_obj += g.edge_costs[e];
    }

    block_cost.assign(num_blocks, std::vector<double>(g.num_classes, 0.0));
    for (int i = 0; i < n; ++i)
      for (int k = 1; k <= g.num_classes; ++k)
        block_cost[rgs[i]][k - 1] += g.node_cost(i, k);

    double node_obj = assign_classes(block_cost, g, classes);
    if (node_obj < kInf && edge_obj + node_obj < best_obj) {
      best_obj = edge_obj + node_obj;
      best_rgs = rgs;
      best_classes = classes;
    }

    // next restricted growth string
    int i = n - 1;
    for (; i > 0; --i) {
      int maxv = 0;
      for (int p = 0; p < i; ++p) maxv = std::max(maxv, rgs[p]);
      if (rgs[i] <= maxv) {
        rgs[i]++;
        break;
      }
      rgs[i] = 0;
    }
    if (i == 0) break;
  }

  std::vector<int> z(n);
  for (int i = 0; i < n; ++i) z[i] = best_rgs[i] + 1;
  return labeling_from_segments(g, std::move(z), std::move(best_classes));
}

}  // namespace amwc
