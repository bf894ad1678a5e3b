#include "amwc/panoptic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace amwc {

bool SegmentGradient::all_zero() const {
  for (double v : d)
    if (v != 0.0) return false;
  return true;
}

RelaxedMasks binary_masks(const std::vector<int>& z_pred, const std::vector<int>& pred_class) {
  RelaxedMasks m;
  m.num_nodes = (int)z_pred.size();
  m.num_segments = (int)pred_class.size();
  m.segment_class = pred_class;
  m.membership.assign((size_t)m.num_nodes * m.num_segments, 0.0);
  for (int i = 0; i < m.num_nodes; ++i) m.at(i, z_pred[i]) = 1.0;
  return m;
}

double iou(const std::vector<uint8_t>& p, const std::vector<uint8_t>& g) {
  if (p.size() != g.size()) throw std::invalid_argument("mask length mismatch");
  long long inter = 0, uni = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    bool a = p[i] != 0, b = g[i] != 0;
    inter += a && b;
    uni += a || b;
  }
  if (uni == 0) return 0.0;
  return (double)inter / (double)uni;
}

double soft_threshold(double u) {
  double a = u * u * u * u;
  double v = 1.0 - u;
  double b = v * v * v * v;
  return a / (a + b);
}

double soft_threshold_grad(double u) {
  double v = 1.0 - u;
  double a = u * u * u * u, b = v * v * v * v;
  double den = a + b;
  return 4.0 * u * u * u * v * v * v / (den * den);
}

double area_sigmoid(double area, double t) { return 1.0 / (1.0 + std::exp(-0.1 * (area - t))); }

namespace {

// areas and pairwise overlaps of predicted vs reference segments
struct Overlaps {
  std::vector<int> pred_area, gt_area;               // indexed by segment id
  std::map<std::pair<int, int>, int> inter;          // (pred, gt) -> count

  double iou(int p, int g) const {
    auto it = inter.find({p, g});
    if (it == inter.end()) return 0.0;
    double u = pred_area[p] + gt_area[g] - it->second;
    return it->second / u;
  }
};

Overlaps compute_overlaps(const std::vector<int>& z_pred, int num_pred, const GroundTruth& gt) {
  Overlaps ov;
  ov.pred_area.assign(num_pred + 1, 0);
  ov.gt_area.assign(gt.num_segments() + 1, 0);
  for (size_t i = 0; i < z_pred.size(); ++i) {
    ov.pred_area[z_pred[i]]++;
    ov.gt_area[gt.segment_id[i]]++;
    ov.inter[{z_pred[i], gt.segment_id[i]}]++;
  }
  return ov;
}

struct ClassSegments {
  std::vector<int> preds, gts;
};

// classes present on either side, ascending, with their segment ids
std::map<int, ClassSegments> group_by_class(const std::vector<int>& pred_class,
                                            const std::vector<int>& gt_class) {
  std::map<int, ClassSegments> by_class;
  for (size_t s = 0; s < pred_class.size(); ++s) by_class[pred_class[s]].preds.push_back((int)s + 1);
  for (size_t s = 0; s < gt_class.size(); ++s) by_class[gt_class[s]].gts.push_back((int)s + 1);
  return by_class;
}

// min-cost assignment of every row (requires n_rows <= n_cols)
std::vector<int> hungarian_min_cost(int n_rows, int n_cols, const std::vector<double>& cost) {
  const double inf = 1e100;
  std::vector<double> u(n_rows + 1, 0.0), v(n_cols + 1, 0.0);
  std::vector<int> p(n_cols + 1, 0), way(n_cols + 1, 0);
  for (int i = 1; i <= n_rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n_cols + 1, inf);
    std::vector<char> used(n_cols + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n_cols; ++j) {
        if (used[j]) continue;
        double cur = cost[(size_t)(i0 - 1) * n_cols + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n_cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n_rows, -1);
  for (int j = 1; j <= n_cols; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// exact DP over subsets of the column side; preds are processed in
// ascending order so ties resolve to the lexicographically smallest
// (pred, gt) pair list
std::vector<std::pair<int, int>> matching_dp(int n_pred, int n_gt,
                                             const std::vector<double>& w) {
  int masks = 1 << n_gt;
  std::vector<double> next(masks, 0.0), cur(masks, 0.0);
  std::vector<std::vector<double>> best(n_pred + 1);
  best[n_pred].assign(masks, 0.0);
  for (int i = n_pred - 1; i >= 0; --i) {
    best[i].assign(masks, 0.0);
    for (int mask = 0; mask < masks; ++mask) {
      double v = best[i + 1][mask];
      for (int g = 0; g < n_gt; ++g) {
        if (mask & (1 << g)) continue;
        double wij = w[(size_t)i * n_gt + g];
        if (wij <= 0.0) continue;
        double c = wij + best[i + 1][mask | (1 << g)];
        if (c > v) v = c;
      }
      best[i][mask] = v;
    }
  }
  std::vector<std::pair<int, int>> pairs;
  int mask = 0;
  for (int i = 0; i < n_pred; ++i) {
    bool took = false;
    for (int g = 0; g < n_gt && !took; ++g) {
      if (mask & (1 << g)) continue;
      double wij = w[(size_t)i * n_gt + g];
      if (wij <= 0.0) continue;
      if (wij + best[i + 1][mask | (1 << g)] == best[i][mask]) {
        pairs.emplace_back(i, g);
        mask |= 1 << g;
        took = true;
      }
    }
  }
  return pairs;
}

}  // namespace

std::vector<std::pair<int, int>> max_weight_matching(int n_pred, int n_gt,
                                                     const std::vector<double>& weights) {
  if (n_pred == 0 || n_gt == 0) return {};
  if (n_gt <= 12 && (size_t)(n_pred + 1) * (1u << n_gt) <= (1u << 22)) {
    return matching_dp(n_pred, n_gt, weights);
  }
  if (n_pred <= 12 && (size_t)(n_gt + 1) * (1u << n_pred) <= (1u << 22)) {
    std::vector<double> wt((size_t)n_gt * n_pred);
    for (int p = 0; p < n_pred; ++p)
      for (int g = 0; g < n_gt; ++g) wt[(size_t)g * n_pred + p] = weights[(size_t)p * n_gt + g];
    auto pairs = matching_dp(n_gt, n_pred, wt);
    for (auto& pr : pairs) std::swap(pr.first, pr.second);
    std::sort(pairs.begin(), pairs.end());
    return pairs;
  }
  // large on both sides: optimal total via assignment, algorithmic tie order
  bool transposed = n_pred > n_gt;
  int rows = transposed ? n_gt : n_pred, cols = transposed ? n_pred : n_gt;
  std::vector<double> cost((size_t)rows * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double wv = transposed ? weights[(size_t)c * n_gt + r] : weights[(size_t)r * n_gt + c];
      cost[(size_t)r * cols + c] = -wv;
    }
  auto row_to_col = hungarian_min_cost(rows, cols, cost);
  std::vector<std::pair<int, int>> pairs;
  for (int r = 0; r < rows; ++r) {
    int c = row_to_col[r];
    if (c < 0) continue;
    int p = transposed ? c : r, g = transposed ? r : c;
    if (weights[(size_t)p * n_gt + g] > 0.0) pairs.emplace_back(p, g);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

MatchSet match_hard(const std::vector<int>& z_pred, const std::vector<int>& pred_class,
                    const GroundTruth& gt) {
  MatchSet out;
  out.soft = false;
  Overlaps ov = compute_overlaps(z_pred, (int)pred_class.size(), gt);
  auto by_class = group_by_class(pred_class, gt.segment_class);
  for (auto& [cls, segs] : by_class) {
    ClassMatches cm;
    cm.cls = cls;
    std::vector<char> pred_used(segs.preds.size(), 0);
    // overlap > 0.5 makes matches unique; references are scanned in id order
    // and exact-0.5 ties go to the smallest prediction id
    for (int g : segs.gts) {
      int best_idx = -1;
      double best_iou = 0.0;
      for (size_t pi = 0; pi < segs.preds.size(); ++pi) {
        if (pred_used[pi]) continue;
        double v = ov.iou(segs.preds[pi], g);
        if (v >= 0.5 && v > best_iou) {
          best_iou = v;
          best_idx = (int)pi;
        }
      }
      if (best_idx >= 0) {
        pred_used[best_idx] = 1;
        cm.matches.push_back({segs.preds[best_idx], g, best_iou});
      } else {
        cm.unmatched_gt.push_back(g);
      }
    }
    for (size_t pi = 0; pi < segs.preds.size(); ++pi)
      if (!pred_used[pi]) cm.unmatched_pred.push_back(segs.preds[pi]);
    out.by_class.push_back(std::move(cm));
  }
  return out;
}

MatchSet match_soft(const std::vector<int>& z_pred, const std::vector<int>& pred_class,
                    const GroundTruth& gt) {
  MatchSet out;
  out.soft = true;
  Overlaps ov = compute_overlaps(z_pred, (int)pred_class.size(), gt);
  auto by_class = group_by_class(pred_class, gt.segment_class);
  for (auto& [cls, segs] : by_class) {
    ClassMatches cm;
    cm.cls = cls;
    int np = (int)segs.preds.size(), ng = (int)segs.gts.size();
    std::vector<double> w((size_t)np * ng);
    for (int p = 0; p < np; ++p)
      for (int g = 0; g < ng; ++g) w[(size_t)p * ng + g] = ov.iou(segs.preds[p], segs.gts[g]);
    auto pairs = max_weight_matching(np, ng, w);
    std::vector<char> pu(np, 0), gu(ng, 0);
    for (auto [p, g] : pairs) {
      cm.matches.push_back({segs.preds[p], segs.gts[g], w[(size_t)p * ng + g]});
      pu[p] = 1;
      gu[g] = 1;
    }
    for (int p = 0; p < np; ++p)
      if (!pu[p]) cm.unmatched_pred.push_back(segs.preds[p]);
    for (int g = 0; g < ng; ++g)
      if (!gu[g]) cm.unmatched_gt.push_back(segs.gts[g]);
    out.by_class.push_back(std::move(cm));
  }
  return out;
}

PqResult pq_exact(const std::vector<int>& z_pred, const std::vector<int>& pred_class,
                  const GroundTruth& gt) {
  MatchSet m = match_hard(z_pred, pred_class, gt);
  PqResult res;
  double sum = 0.0;
  for (auto& cm : m.by_class) {
    ClassPq c;
    c.cls = cm.cls;
    c.tp = (int)cm.matches.size();
    c.fp = (int)cm.unmatched_pred.size();
    c.fn = (int)cm.unmatched_gt.size();
    double iou_sum = 0.0;
    for (auto& p : cm.matches) iou_sum += p.iou;
    c.pq = iou_sum / (c.tp + 0.5 * (c.fp + c.fn));
    c.sq = c.tp > 0 ? iou_sum / c.tp : 0.0;
    sum += c.pq;
    res.per_class.push_back(c);
  }
  res.mean = res.per_class.empty() ? 1.0 : sum / res.per_class.size();
  return res;
}

SurrogateResult pq_surrogate(const std::vector<int>& z_pred, const std::vector<int>& pred_class,
                             const GroundTruth& gt) {
  SurrogateResult res;
  res.match = match_soft(z_pred, pred_class, gt);
  Overlaps ov = compute_overlaps(z_pred, (int)pred_class.size(), gt);
  double sum = 0.0;
  for (auto& cm : res.match.by_class) {
    double t = gt.threshold(cm.cls);
    double num = 0.0, den = 0.0;
    for (auto& p : cm.matches) {
      double s = area_sigmoid(ov.pred_area[p.pred], t);
      double h = soft_threshold(p.iou);
      num += h * s * p.iou;
      den += h * s;
    }
    double fp_sum = 0.0;
    for (int p : cm.unmatched_pred) fp_sum += area_sigmoid(ov.pred_area[p], t);
    den += 0.5 * (fp_sum + cm.unmatched_gt.size());
    double value = den > 0.0 ? num / den : 0.0;
    res.per_class.emplace_back(cm.cls, value);
    sum += value;
  }
  res.mean = res.per_class.empty() ? 1.0 : sum / res.per_class.size();
  return res;
}

SegmentGradient pq_surrogate_grad_relaxed(const RelaxedMasks& masks, const GroundTruth& gt,
                                          const MatchSet& match, double loss_scale,
                                          const SurrogateGradOptions& opts) {
  SegmentGradient grad;
  grad.num_nodes = masks.num_nodes;
  grad.num_segments = masks.num_segments;
  grad.d.assign((size_t)grad.num_nodes * grad.num_segments, 0.0);
  if (match.by_class.empty() || loss_scale == 0.0) return grad;
  // loss = loss_scale * (1 - mean over active classes); reference masks and
  // the matching are constants here
  double scale = -loss_scale / (double)match.by_class.size();

  int n = masks.num_nodes;
  for (auto& cm : match.by_class) {
    double t = gt.threshold(cm.cls);

    struct PairTerms {
      int pred, gt;
      double inter, uni, u, h, hp, sigma, dsig;
    };
    std::vector<PairTerms> pairs;
    double num = 0.0, den = 0.0;
    for (auto& mp : cm.matches) {
      PairTerms pt;
      pt.pred = mp.pred;
      pt.gt = mp.gt;
      double inter = 0.0, uni = 0.0, area = 0.0;
      for (int i = 0; i < n; ++i) {
        double p = masks.at(i, pt.pred);
        double gi = gt.segment_id[i] == pt.gt ? 1.0 : 0.0;
        inter += p * gi;
        uni += p + gi - p * gi;
        area += p;
      }
      pt.inter = inter;
      pt.uni = uni;
      pt.u = uni > 0.0 ? inter / uni : 0.0;
      pt.h = soft_threshold(pt.u);
      pt.hp = soft_threshold_grad(pt.u);
      pt.sigma = area_sigmoid(area, t);
      pt.dsig = 0.1 * pt.sigma * (1.0 - pt.sigma);
      num += pt.h * pt.sigma * pt.u;
      den += pt.h * pt.sigma;
      pairs.push_back(pt);
    }
    struct FpTerms {
      int pred;
      double sigma, dsig;
    };
    std::vector<FpTerms> fps;
    for (int p : cm.unmatched_pred) {
      double area = 0.0;
      for (int i = 0; i < n; ++i) area += masks.at(i, p);
      FpTerms ft{p, area_sigmoid(area, t), 0.0};
      ft.dsig = 0.1 * ft.sigma * (1.0 - ft.sigma);
      fps.push_back(ft);
    }
    double fp_sigma_sum = 0.0;
    for (auto& ft : fps) fp_sigma_sum += ft.sigma;
    den += 0.5 * (fp_sigma_sum + (double)cm.unmatched_gt.size());

    if (den <= 0.0) continue;
    double inv_d2 = 1.0 / (den * den);

    for (auto& pt : pairs) {
      double cu_n = (pt.hp * pt.u + pt.h) * pt.sigma;  // coefficient of du in d(num)
      double ca_n = pt.h * pt.u * pt.dsig;             // membership term via the area
      double cu_d = pt.hp * pt.sigma;
      double ca_d = pt.h * pt.dsig;
      double u2 = pt.uni * pt.uni;
      for (int i = 0; i < n; ++i) {
        double gi = gt.segment_id[i] == pt.gt ? 1.0 : 0.0;
        double du = (gi * pt.uni - pt.inter * (1.0 - gi)) / u2;
        du *= opts.iou_path_scale;
        double dn = cu_n * du + ca_n;
        double dd = cu_d * du + ca_d;
        grad.at(i, pt.pred) += scale * (dn * den - num * dd) * inv_d2;
      }
    }
    for (auto& ft : fps) {
      double dd = 0.5 * ft.dsig;
      double v = scale * (-num * dd) * inv_d2;
      for (int i = 0; i < n; ++i) grad.at(i, ft.pred) += v;
    }
  }
  return grad;
}

SegmentGradient pq_surrogate_grad(const std::vector<int>& z_pred,
                                  const std::vector<int>& pred_class, const GroundTruth& gt,
                                  const MatchSet& match, double loss_scale,
                                  const SurrogateGradOptions& opts) {
  return pq_surrogate_grad_relaxed(binary_masks(z_pred, pred_class), gt, match, loss_scale, opts);
}

double instance_score(const std::vector<uint8_t>& mask, int cls, const CostGraph& g) {
  long long size = 0;
  for (uint8_t b : mask) size += b != 0;
  if (size == 0) throw std::invalid_argument("instance mask is empty");

  double node_sum = 0.0;
  for (int i = 0; i < g.num_nodes; ++i)
    if (mask[i]) node_sum += g.node_cost(i, cls);

  double boundary_sum = 0.0, internal_sum = 0.0;
  long long boundary_n = 0, internal_n = 0;
  for (size_t e = 0; e < g.edges.size(); ++e) {
    auto [i, j] = g.edges[e];
    bool a = mask[i] != 0, b = mask[j] != 0;
    if (a != b) {
      boundary_sum += g.edge_costs[e];
      boundary_n++;
    } else if (a && b) {
      internal_sum += g.edge_costs[e];
      internal_n++;
    }
  }
  double score = node_sum / (double)size;
  if (boundary_n > 0) score += boundary_sum / (double)boundary_n;
  if (internal_n > 0) score -= internal_sum / (double)internal_n;
  return score;
}

}  // namespace amwc
