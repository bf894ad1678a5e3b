#include "amwc/blackbox.hpp"

#include <functional>
#include <stdexcept>

#include "amwc/parallel.hpp"
#include "amwc/rng.hpp"
#include "amwc/solver.hpp"

namespace amwc {

void CostGradient::accumulate(const CostGradient& other, double weight) {
  if (d_node.empty()) d_node.assign(other.d_node.size(), 0.0);
  if (d_edge.empty()) d_edge.assign(other.d_edge.size(), 0.0);
  for (size_t i = 0; i < d_node.size(); ++i) d_node[i] += weight * other.d_node[i];
  for (size_t i = 0; i < d_edge.size(); ++i) d_edge[i] += weight * other.d_edge[i];
}

std::vector<double> sample_lambdas(const PerturbConfig& cfg) {
  if (cfg.num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  if (!(cfg.lambda_min > 0.0) || cfg.lambda_max < cfg.lambda_min)
    throw std::invalid_argument("need 0 < lambda_min <= lambda_max");
  std::vector<double> ls(cfg.num_samples);
  for (int i = 0; i < cfg.num_samples; ++i) {
    double u = (derive_seed(cfg.seed, (uint64_t)i) >> 11) * 0x1.0p-53;
    ls[i] = cfg.lambda_min + u * (cfg.lambda_max - cfg.lambda_min);
  }
  return ls;
}

namespace {

CostGradient zero_gradient(const CostGraph& g) {
  CostGradient cg;
  cg.d_node.assign((size_t)g.num_nodes * g.num_classes, 0.0);
  cg.d_edge.assign(g.edges.size(), 0.0);
  return cg;
}

CostGradient solution_difference(const CostGraph& g, const Labeling& fwd,
                                 const std::vector<int>& x_pert,
                                 const std::vector<uint8_t>& y_pert, double lambda) {
  CostGradient cg = zero_gradient(g);
  double inv = 1.0 / lambda;
  for (int i = 0; i < g.num_nodes; ++i) {
    if (x_pert[i] == fwd.node_class[i]) continue;
    cg.d_node[(size_t)i * g.num_classes + (x_pert[i] - 1)] += inv;
    cg.d_node[(size_t)i * g.num_classes + (fwd.node_class[i] - 1)] -= inv;
  }
  for (size_t e = 0; e < g.edges.size(); ++e)
    cg.d_edge[e] = ((double)y_pert[e] - (double)fwd.edge_cut[e]) * inv;
  return cg;
}

CostGradient average_over_lambdas(const CostGraph& g, const PerturbConfig& cfg,
                                  const std::function<CostGradient(double)>& single) {
  std::vector<double> lambdas = sample_lambdas(cfg);
  std::vector<CostGradient> parts(lambdas.size());
  parallel_for((int)lambdas.size(), cfg.workers,
               [&](int i) { parts[i] = single(lambdas[i]); });
  CostGradient out = zero_gradient(g);
  for (auto& p : parts) out.accumulate(p, 1.0 / (double)lambdas.size());
  return out;
}

}  // namespace

CostGradient backward_panoptic(const CostGraph& g, const Labeling& fwd, const SegmentGradient& dz,
                               double lambda, std::span<const int> extra_classes) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (dz.num_nodes != g.num_nodes || dz.num_segments != fwd.num_segments())
    throw std::invalid_argument("segment gradient shape mismatch");

  // With a zero incoming gradient the perturbed problem is the forward
  // problem, whose solution is the forward labeling by definition.
  if (dz.all_zero()) return zero_gradient(g);

  int j = fwd.num_segments();
  int total = j + (int)extra_classes.size();
  CostGraph lifted;
  lifted.num_nodes = g.num_nodes;
  lifted.num_classes = total;
  lifted.edges = g.edges;
  lifted.edge_costs = g.edge_costs;
  lifted.partitionable.assign(total + 1, 0);
  lifted.node_costs.resize((size_t)g.num_nodes * total);
  for (int i = 0; i < g.num_nodes; ++i) {
    for (int l = 1; l <= j; ++l)
      lifted.node_cost(i, l) = g.node_cost(i, fwd.segment_class[l - 1]) + lambda * dz.at(i, l);
    for (int l = j + 1; l <= total; ++l)
      lifted.node_cost(i, l) = g.node_cost(i, extra_classes[l - j - 1]);
  }

  Labeling pert = solve_mwc(lifted);
  // map each node's label slot back to its semantic class
  std::vector<int> x_pert(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) {
    int slot = pert.segment_class[pert.segment_id[i] - 1];
    x_pert[i] = slot <= j ? fwd.segment_class[slot - 1] : extra_classes[slot - j - 1];
  }
  return solution_difference(g, fwd, x_pert, pert.edge_cut, lambda);
}

CostGradient backward_robust(const CostGraph& g, const Labeling& fwd, const SegmentGradient& dz,
                             const PerturbConfig& cfg, std::span<const int> extra_classes) {
  return average_over_lambdas(
      g, cfg, [&](double l) { return backward_panoptic(g, fwd, dz, l, extra_classes); });
}

CostGradient backward_perturb_node(const CostGraph& g, const Labeling& fwd,
                                   std::span<const double> node_grad, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (node_grad.size() != (size_t)g.num_nodes * g.num_classes)
    throw std::invalid_argument("node gradient shape mismatch");
  CostGraph pert = g;
  for (size_t i = 0; i < pert.node_costs.size(); ++i) pert.node_costs[i] += lambda * node_grad[i];
  Labeling lab = solve(pert);
  return solution_difference(g, fwd, lab.node_class, lab.edge_cut, lambda);
}

CostGradient backward_perturb_edge(const CostGraph& g, const Labeling& fwd,
                                   std::span<const double> edge_grad, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (edge_grad.size() != g.edges.size())
    throw std::invalid_argument("edge gradient shape mismatch");
  CostGraph pert = g;
  for (size_t e = 0; e < pert.edge_costs.size(); ++e) pert.edge_costs[e] += lambda * edge_grad[e];
  Labeling lab = solve(pert);
  return solution_difference(g, fwd, lab.node_class, lab.edge_cut, lambda);
}

double node_loss(const Labeling& fwd, std::span<const int> x_gt) {
  // one-hot L1 distance counts 2 per mislabeled node
  double miss = 0.0;
  for (size_t i = 0; i < x_gt.size(); ++i) miss += fwd.node_class[i] != x_gt[i] ? 2.0 : 0.0;
  return miss / (double)x_gt.size();
}

std::vector<double> node_loss_grad(const Labeling& fwd, std::span<const int> x_gt,
                                   int num_classes, double scale) {
  size_t n = x_gt.size();
  std::vector<double> grad(n * num_classes, 0.0);
  double v = scale / (double)n;
  for (size_t i = 0; i < n; ++i) {
    if (fwd.node_class[i] == x_gt[i]) continue;
    grad[i * num_classes + (fwd.node_class[i] - 1)] += v;
    grad[i * num_classes + (x_gt[i] - 1)] -= v;
  }
  return grad;
}

double edge_loss(const Labeling& fwd, std::span<const uint8_t> y_gt) {
  double a = 0.0, b = 0.0, c = 0.0;  // true cuts, spurious cuts, missed cuts
  for (size_t e = 0; e < y_gt.size(); ++e) {
    bool y = fwd.edge_cut[e] != 0, yg = y_gt[e] != 0;
    a += y && yg;
    b += y && !yg;
    c += !y && yg;
  }
  double den = a + 0.5 * (b + c);
  if (den == 0.0) return 0.0;  // no cuts anywhere on either side
  return 1.0 - a / den;
}

std::vector<double> edge_loss_grad(const Labeling& fwd, std::span<const uint8_t> y_gt,
                                   double scale) {
  double a = 0.0, b = 0.0, c = 0.0;
  for (size_t e = 0; e < y_gt.size(); ++e) {
    bool y = fwd.edge_cut[e] != 0, yg = y_gt[e] != 0;
    a += y && yg;
    b += y && !yg;
    c += !y && yg;
  }
  double den = a + 0.5 * (b + c);
  std::vector<double> grad(y_gt.size(), 0.0);
  if (den == 0.0) return grad;
  // d(den)/dy(e) = 0.5 for every edge, d(a)/dy(e) = y_gt(e)
  double inv_d2 = 1.0 / (den * den);
  for (size_t e = 0; e < y_gt.size(); ++e) {
    double dyg = y_gt[e] != 0 ? 1.0 : 0.0;
    grad[e] = -scale * (dyg * den - 0.5 * a) * inv_d2;
  }
  return grad;
}

CostGradient backward_node_loss(const CostGraph& g, const Labeling& fwd,
                                std::span<const int> x_gt, double lambda, double scale) {
  auto grad = node_loss_grad(fwd, x_gt, g.num_classes, scale);
  return backward_perturb_node(g, fwd, grad, lambda);
}

CostGradient backward_edge_loss(const CostGraph& g, const Labeling& fwd,
                                std::span<const uint8_t> y_gt, double lambda, double scale) {
  auto grad = edge_loss_grad(fwd, y_gt, scale);
  return backward_perturb_edge(g, fwd, grad, lambda);
}

CostGradient backward_node_loss_robust(const CostGraph& g, const Labeling& fwd,
                                       std::span<const int> x_gt, const PerturbConfig& cfg,
                                       double scale) {
  auto grad = node_loss_grad(fwd, x_gt, g.num_classes, scale);
  return average_over_lambdas(
      g, cfg, [&](double l) { return backward_perturb_node(g, fwd, grad, l); });
}

CostGradient backward_edge_loss_robust(const CostGraph& g, const Labeling& fwd,
                                       std::span<const uint8_t> y_gt, const PerturbConfig& cfg,
                                       double scale) {
  auto grad = edge_loss_grad(fwd, y_gt, scale);
  return average_over_lambdas(
      g, cfg, [&](double l) { return backward_perturb_edge(g, fwd, grad, l); });
}

}  // namespace amwc
