#include "amwc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "amwc/exact_oracle.hpp"
#include "amwc/solver.hpp"

namespace amwc {

CostGraph random_instance(Rng& rng, const RandomInstanceOptions& opt) {
  CostGraph g;
  g.num_nodes = 2 + rng.uniform_int(std::max(1, opt.max_nodes - 1));
  g.num_classes = 1 + rng.uniform_int(opt.max_classes);
  g.node_costs.resize((size_t)g.num_nodes * g.num_classes);
  for (double& c : g.node_costs) c = rng.uniform(opt.cost_lo, opt.cost_hi);

  int target = (int)(opt.edge_factor * g.num_nodes);
  int max_possible = g.num_nodes * (g.num_nodes - 1) / 2;
  target = std::min(target, max_possible);
  std::set<std::pair<int, int>> es;
  for (int tries = 0; (int)es.size() < target && tries < 20 * target + 20; ++tries) {
    int a = rng.uniform_int(g.num_nodes), b = rng.uniform_int(g.num_nodes);
    if (a == b) continue;
    es.emplace(std::min(a, b), std::max(a, b));
  }
  g.edges.assign(es.begin(), es.end());
  g.edge_costs.resize(g.edges.size());
  for (double& c : g.edge_costs) c = rng.uniform(opt.cost_lo, opt.cost_hi);

  g.partitionable.assign(g.num_classes + 1, 0);
  if (opt.random_partitionable)
    for (int k = 1; k <= g.num_classes; ++k) g.partitionable[k] = rng.u01() < 0.5 ? 1 : 0;
  return g;
}

CostGraph random_dominant_instance(Rng& rng, int max_nodes, int max_classes) {
  RandomInstanceOptions opt;
  opt.max_nodes = max_nodes;
  opt.max_classes = max_classes;
  CostGraph g = random_instance(rng, opt);
  int dominant = 1 + rng.uniform_int(g.num_classes);
  for (int i = 0; i < g.num_nodes; ++i)
    for (int k = 1; k <= g.num_classes; ++k)
      g.node_cost(i, k) = k == dominant ? rng.uniform(-2.0, -1.0) : rng.uniform(0.0, 1.0);
  for (double& c : g.edge_costs) c = rng.uniform(0.001, 1.0);
  return g;
}

GroundTruth random_ground_truth(Rng& rng, int num_nodes, int max_segments, int max_classes) {
  GroundTruth gt;
  int s = 1 + rng.uniform_int(std::min(max_segments, num_nodes));
  gt.segment_id.resize(num_nodes);
  for (int i = 0; i < num_nodes; ++i)
    gt.segment_id[i] = i < s ? i + 1 : 1 + rng.uniform_int(s);
  gt.segment_class.resize(s);
  for (int& c : gt.segment_class) c = 1 + rng.uniform_int(max_classes);
  gt.area_threshold.assign(max_classes + 1, 0.0);
  for (int k = 1; k <= max_classes; ++k)
    gt.area_threshold[k] = rng.uniform(1.0, std::max(2.0, num_nodes / 2.0));
  return gt;
}

RelaxedMasks random_relaxed_masks(Rng& rng, int num_nodes, int max_segments, int max_classes) {
  RelaxedMasks m;
  m.num_nodes = num_nodes;
  m.num_segments = 1 + rng.uniform_int(max_segments);
  m.segment_class.resize(m.num_segments);
  for (int& c : m.segment_class) c = 1 + rng.uniform_int(max_classes);
  m.membership.resize((size_t)num_nodes * m.num_segments);
  for (double& v : m.membership) v = rng.uniform(0.1, 0.9);
  return m;
}

namespace {

// matching on relaxed IoU weights, same shape as the binary soft matching
MatchSet match_soft_relaxed(const RelaxedMasks& masks, const GroundTruth& gt) {
  MatchSet out;
  out.soft = true;
  std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_class;
  for (int s = 1; s <= masks.num_segments; ++s)
    by_class[masks.segment_class[s - 1]].first.push_back(s);
  for (int s = 1; s <= gt.num_segments(); ++s)
    by_class[gt.segment_class[s - 1]].second.push_back(s);

  for (auto& [cls, segs] : by_class) {
    auto& [preds, gts] = segs;
    ClassMatches cm;
    cm.cls = cls;
    int np = (int)preds.size(), ng = (int)gts.size();
    std::vector<double> w((size_t)np * ng, 0.0);
    for (int p = 0; p < np; ++p)
      for (int q = 0; q < ng; ++q) {
        double inter = 0.0, uni = 0.0;
        for (int i = 0; i < masks.num_nodes; ++i) {
          double pv = masks.at(i, preds[p]);
          double gv = gt.segment_id[i] == gts[q] ? 1.0 : 0.0;
          inter += pv * gv;
          uni += pv + gv - pv * gv;
        }
        w[(size_t)p * ng + q] = uni > 0.0 ? inter / uni : 0.0;
      }
    auto pairs = max_weight_matching(np, ng, w);
    std::vector<char> pu(np, 0), gu(ng, 0);
    for (auto [p, q] : pairs) {
      cm.matches.push_back({preds[p], gts[q], w[(size_t)p * ng + q]});
      pu[p] = 1;
      gu[q] = 1;
    }
    for (int p = 0; p < np; ++p)
      if (!pu[p]) cm.unmatched_pred.push_back(preds[p]);
    for (int q = 0; q < ng; ++q)
      if (!gu[q]) cm.unmatched_gt.push_back(gts[q]);
    out.by_class.push_back(std::move(cm));
  }
  return out;
}

}  // namespace

double relaxed_surrogate_value(const RelaxedMasks& masks, const GroundTruth& gt,
                               const MatchSet& match) {
  if (match.by_class.empty()) return 1.0;
  double total = 0.0;
  for (auto& cm : match.by_class) {
    double t = gt.threshold(cm.cls);
    double num = 0.0, den = 0.0;
    for (auto& mp : cm.matches) {
      double inter = 0.0, uni = 0.0, area = 0.0;
      for (int i = 0; i < masks.num_nodes; ++i) {
        double p = masks.at(i, mp.pred);
        double gi = gt.segment_id[i] == mp.gt ? 1.0 : 0.0;
        inter += p * gi;
        uni += p + gi - p * gi;
        area += p;
      }
      double u = uni > 0.0 ? inter / uni : 0.0;
      double u4 = u * u * u * u;
      double v = 1.0 - u;
      double v4 = v * v * v * v;
      double h = u4 / (u4 + v4);
      double sig = 1.0 / (1.0 + std::exp(-0.1 * (area - t)));
      num += h * sig * u;
      den += h * sig;
    }
    for (int p : cm.unmatched_pred) {
      double area = 0.0;
      for (int i = 0; i < masks.num_nodes; ++i) area += masks.at(i, p);
      den += 0.5 / (1.0 + std::exp(-0.1 * (area - t)));
    }
    den += 0.5 * (double)cm.unmatched_gt.size();
    total += den > 0.0 ? num / den : 0.0;
  }
  return total / (double)match.by_class.size();
}

double relaxed_surrogate_loss(const RelaxedMasks& masks, const GroundTruth& gt,
                              const MatchSet& match, double loss_scale) {
  return loss_scale * (1.0 - relaxed_surrogate_value(masks, gt, match));
}

SegmentGradient finite_difference_grad(const RelaxedMasks& masks, const GroundTruth& gt,
                                       const MatchSet& match, double loss_scale, double step) {
  SegmentGradient fd;
  fd.num_nodes = masks.num_nodes;
  fd.num_segments = masks.num_segments;
  fd.d.resize((size_t)fd.num_nodes * fd.num_segments);
  RelaxedMasks work = masks;
  for (size_t idx = 0; idx < fd.d.size(); ++idx) {
    double orig = work.membership[idx];
    work.membership[idx] = orig + step;
    double up = relaxed_surrogate_loss(work, gt, match, loss_scale);
    work.membership[idx] = orig - step;
    double down = relaxed_surrogate_loss(work, gt, match, loss_scale);
    work.membership[idx] = orig;
    fd.d[idx] = (up - down) / (2.0 * step);
  }
  return fd;
}

namespace {

double max_abs(const CostGradient& cg) {
  double m = 0.0;
  for (double v : cg.d_node) m = std::max(m, std::abs(v));
  for (double v : cg.d_edge) m = std::max(m, std::abs(v));
  return m;
}

void check_fd(const CheckOptions& opt, std::vector<CheckResult>& out) {
  CheckResult r{"fd-gradient", true, 0.0, ""};
  for (int n = 0; n < opt.fd_instances; ++n) {
    Rng rng(derive_seed(opt.seed, 100, n));
    int nodes = 6 + rng.uniform_int(18);
    RelaxedMasks masks = random_relaxed_masks(rng, nodes, 4, 3);
    GroundTruth gt = random_ground_truth(rng, nodes, 4, 3);
    MatchSet match = match_soft_relaxed(masks, gt);
    double w = rng.uniform(0.5, 10.0);
    SegmentGradient an = pq_surrogate_grad_relaxed(masks, gt, match, w, opt.grad_opts);
    SegmentGradient fd = finite_difference_grad(masks, gt, match, w, 1e-5);
    for (size_t i = 0; i < an.d.size(); ++i) {
      double rel = std::abs(an.d[i] - fd.d[i]) / std::max(std::abs(fd.d[i]), 0.01);
      r.max_error = std::max(r.max_error, rel);
    }
  }
  r.passed = r.max_error <= 1e-4;
  if (!r.passed) r.detail = "analytic gradient disagrees with finite differences";
  out.push_back(r);
}

void check_zero_grad(const CheckOptions& opt, std::vector<CheckResult>& out) {
  CheckResult r{"zero-gradient", true, 0.0, ""};
  for (int n = 0; n < opt.zero_grad_instances; ++n) {
    Rng rng(derive_seed(opt.seed, 200, n));
    CostGraph g = random_instance(rng);
    Labeling fwd = solve(g);
    SegmentGradient dz;
    dz.num_nodes = g.num_nodes;
    dz.num_segments = fwd.num_segments();
    dz.d.assign((size_t)dz.num_nodes * dz.num_segments, 0.0);

    r.max_error = std::max(r.max_error, max_abs(backward_panoptic(g, fwd, dz, 2.0)));
    PerturbConfig cfg = opt.perturb;
    cfg.seed = derive_seed(opt.seed, 201, n);
    r.max_error = std::max(r.max_error, max_abs(backward_robust(g, fwd, dz, cfg)));
    std::vector<double> zn((size_t)g.num_nodes * g.num_classes, 0.0);
    r.max_error = std::max(r.max_error, max_abs(backward_perturb_node(g, fwd, zn, 2.0)));
    std::vector<double> ze(g.edges.size(), 0.0);
    r.max_error = std::max(r.max_error, max_abs(backward_perturb_edge(g, fwd, ze, 2.0)));
    r.max_error = std::max(
        r.max_error, max_abs(backward_node_loss(g, fwd, fwd.node_class, 2.0)));
  }
  r.passed = r.max_error == 0.0;
  if (!r.passed) r.detail = "zero incoming gradient produced a nonzero cost gradient";
  out.push_back(r);
}

void check_entry_range(const CheckOptions& opt, std::vector<CheckResult>& out) {
  CheckResult r{"entry-range", true, 0.0, ""};
  for (int n = 0; n < opt.zero_grad_instances; ++n) {
    Rng rng(derive_seed(opt.seed, 300, n));
    CostGraph g = random_instance(rng);
    Labeling fwd = solve(g);
    SegmentGradient dz;
    dz.num_nodes = g.num_nodes;
    dz.num_segments = fwd.num_segments();
    dz.d.resize((size_t)dz.num_nodes * dz.num_segments);
    for (double& v : dz.d) v = rng.uniform(-1.0, 1.0);
    double lambda = rng.uniform(0.5, 4.0);
    CostGradient cg = backward_panoptic(g, fwd, dz, lambda);
    double inv = 1.0 / lambda;
    auto dev = [&](double v) {
      return std::min({std::abs(v), std::abs(v - inv), std::abs(v + inv)});
    };
    for (double v : cg.d_node) r.max_error = std::max(r.max_error, dev(v));
    for (double v : cg.d_edge) r.max_error = std::max(r.max_error, dev(v));
  }
  r.passed = r.max_error == 0.0;
  if (!r.passed) r.detail = "entries not in {-1/lambda, 0, +1/lambda}";
  out.push_back(r);
}

void check_soft_match_oracle(const CheckOptions& opt, std::vector<CheckResult>& out) {
  CheckResult r{"soft-match-oracle", true, 0.0, ""};
  for (int n = 0; n < 200; ++n) {
    Rng rng(derive_seed(opt.seed, 400, n));
    int np = 1 + rng.uniform_int(4), ng = 1 + rng.uniform_int(4);
    std::vector<double> w((size_t)np * ng);
    for (double& v : w) v = rng.u01() < 0.2 ? 0.0 : rng.u01();
    auto pairs = max_weight_matching(np, ng, w);
    double got = 0.0;
    for (auto [p, g] : pairs) got += w[(size_t)p * ng + g];
    // exhaustive: every injective assignment of preds to gts (or none)
    double best = 0.0;
    std::vector<char> used(ng, 0);
    auto rec = [&](auto&& self, int p, double acc) -> void {
      if (p == np) {
        best = std::max(best, acc);
        return;
      }
      self(self, p + 1, acc);
      for (int g = 0; g < ng; ++g) {
        if (used[g] || w[(size_t)p * ng + g] <= 0.0) continue;
        used[g] = 1;
        self(self, p + 1, acc + w[(size_t)p * ng + g]);
        used[g] = 0;
      }
    };
    rec(rec, 0, 0.0);
    r.max_error = std::max(r.max_error, std::abs(best - got));
  }
  r.passed = r.max_error <= 1e-12;
  if (!r.passed) r.detail = "matching total differs from exhaustive search";
  out.push_back(r);
}

void check_pq_bounds(const CheckOptions& opt, std::vector<CheckResult>& out) {
  CheckResult r{"pq-bounds", true, 0.0, ""};
  double lo = 0.0, hi = 1.0;
  for (int n = 0; n < 100; ++n) {
    Rng rng(derive_seed(opt.seed, 500, n));
    int nodes = 4 + rng.uniform_int(40);
    GroundTruth gt = random_ground_truth(rng, nodes, 5, 3);
    int np = 1 + rng.uniform_int(5);
    std::vector<int> z(nodes), pc(np);
    for (int i = 0; i < nodes; ++i) z[i] = i < np ? i + 1 : 1 + rng.uniform_int(np);
    for (int& c : pc) c = 1 + rng.uniform_int(3);
    double pq = pq_exact(z, pc, gt).mean;
    double sur = pq_surrogate(z, pc, gt).mean;
    lo = std::min({lo, pq, sur});
    hi = std::max({hi, pq, sur});

    // every segment appears in at most one matched pair, on both sides
    for (const MatchSet& m : {match_hard(z, pc, gt), match_soft(z, pc, gt)}) {
      std::set<int> preds, gts;
      for (auto& cm : m.by_class)
        for (auto& mp : cm.matches) {
          if (!preds.insert(mp.pred).second || !gts.insert(mp.gt).second) {
            r.passed = false;
            r.detail = "segment matched twice";
          }
          if (!m.soft && mp.iou < 0.5) {
            r.passed = false;
            r.detail = "hard match below 0.5";
          }
        }
    }
  }
  r.max_error = std::max(0.0 - lo, hi - 1.0);
  r.passed = r.passed && lo >= 0.0 && hi <= 1.0;
  if (!r.passed && r.detail.empty()) r.detail = "metric escaped [0,1]";
  out.push_back(r);
}

void check_permutation(const CheckOptions& opt, std::vector<CheckResult>& out) {
  CheckResult r{"pq-permutation", true, 0.0, ""};
  for (int n = 0; n < 50; ++n) {
    Rng rng(derive_seed(opt.seed, 600, n));
    int nodes = 6 + rng.uniform_int(30);
    GroundTruth gt = random_ground_truth(rng, nodes, 5, 3);
    int np = 1 + rng.uniform_int(5);
    std::vector<int> z(nodes), pc(np);
    for (int i = 0; i < nodes; ++i) z[i] = i < np ? i + 1 : 1 + rng.uniform_int(np);
    for (int& c : pc) c = 1 + rng.uniform_int(3);

    double pq0 = pq_exact(z, pc, gt).mean;
    double sur0 = pq_surrogate(z, pc, gt).mean;

    // permute prediction ids
    std::vector<int> perm(np);
    for (int i = 0; i < np; ++i) perm[i] = i;
    for (int i = np - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    std::vector<int> z2(nodes), pc2(np);
    for (int i = 0; i < nodes; ++i) z2[i] = perm[z[i] - 1] + 1;
    for (int s = 0; s < np; ++s) pc2[perm[s]] = pc[s];

    double pq1 = pq_exact(z2, pc2, gt).mean;
    double sur1 = pq_surrogate(z2, pc2, gt).mean;
    r.max_error = std::max({r.max_error, std::abs(pq0 - pq1), std::abs(sur0 - sur1)});

    // permute reference ids as well
    int ns = gt.num_segments();
    std::vector<int> gperm(ns);
    for (int i = 0; i < ns; ++i) gperm[i] = i;
    for (int i = ns - 1; i > 0; --i) std::swap(gperm[i], gperm[rng.uniform_int(i + 1)]);
    GroundTruth gt2 = gt;
    for (int i = 0; i < nodes; ++i) gt2.segment_id[i] = gperm[gt.segment_id[i] - 1] + 1;
    for (int s = 0; s < ns; ++s) gt2.segment_class[gperm[s]] = gt.segment_class[s];

    double pq2 = pq_exact(z, pc, gt2).mean;
    double sur2 = pq_surrogate(z, pc, gt2).mean;
    r.max_error = std::max({r.max_error, std::abs(pq0 - pq2), std::abs(sur0 - sur2)});
  }
  r.passed = r.max_error <= 1e-12;
  if (!r.passed) r.detail = "metric changed under segment id permutation";
  out.push_back(r);
}

void check_feasibility(const CheckOptions& opt, std::vector<CheckResult>& out) {
  CheckResult r{"solver-feasibility", true, 0.0, ""};
  int bad = 0;
  for (int n = 0; n < opt.feasibility_instances; ++n) {
    Rng rng(derive_seed(opt.seed, 700, n));
    CostGraph g = random_instance(rng);
    Labeling lab = solve(g);
    if (!is_feasible(g, lab)) bad++;
  }
  r.max_error = bad;
  r.passed = bad == 0;
  if (!r.passed) r.detail = std::to_string(bad) + " infeasible outputs";
  out.push_back(r);
}

void check_oracle_bound(const CheckOptions& opt, std::vector<CheckResult>& out) {
  CheckResult r{"oracle-bound", true, 0.0, ""};
  for (int n = 0; n < 50; ++n) {
    Rng rng(derive_seed(opt.seed, 800, n));
    RandomInstanceOptions io;
    io.max_nodes = opt.oracle_nodes;
    io.max_classes = 3;
    CostGraph g = random_instance(rng, io);
    double heur = solve(g).objective;
    double best = brute_force(g).objective;
    r.max_error = std::max(r.max_error, best - heur);
  }
  r.passed = r.max_error <= 1e-9;
  if (!r.passed) r.detail = "heuristic beat the exact optimum";
  out.push_back(r);
}

}  // namespace

std::vector<CheckResult> run_gradient_checks(const CheckOptions& opt) {
  std::vector<CheckResult> out;
  check_fd(opt, out);
  check_zero_grad(opt, out);
  check_entry_range(opt, out);
  check_soft_match_oracle(opt, out);
  check_pq_bounds(opt, out);
  check_permutation(opt, out);
  check_feasibility(opt, out);
  check_oracle_bound(opt, out);
  return out;
}

}  // namespace amwc
