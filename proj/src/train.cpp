#include "amwc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "amwc/instance_io.hpp"
#include "amwc/panoptic.hpp"
#include "amwc/parallel.hpp"
#include "amwc/rng.hpp"
#include "amwc/solver.hpp"

namespace amwc {

namespace {

int distance_band(const SyntheticTask& t, int a, int b) {
  int d = b - a < t.width && a / t.width == b / t.width ? b - a : (b - a) / t.width;
  for (size_t i = 0; i < kTaskDistances.size(); ++i)
    if (kTaskDistances[i] == d) return (int)i;
  throw std::logic_error("edge distance outside task bands");
}

}  // namespace

SyntheticTask gen_task(uint64_t seed, int height, int width, int num_instances,
                       int thing_classes, int stuff_classes, double noise) {
  if (height < 1 || width < 1 || num_instances < 0 || thing_classes < 0 || stuff_classes < 1)
    throw std::invalid_argument("bad task shape");
  int nodes = height * width;
  int num_classes = thing_classes + stuff_classes;

  // owner per node: -1-b for stuff band b, rectangle index otherwise
  std::vector<int> owner;
  std::vector<int> rect_class(num_instances);
  const int max_attempts = 50;
  bool placed = false;
  for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
    Rng rng(derive_seed(seed, 11, attempt));
    owner.assign(nodes, 0);
    // horizontal stuff bands, each at least one row
    std::vector<int> band_start(stuff_classes + 1, 0);
    band_start[stuff_classes] = height;
    for (int b = 1; b < stuff_classes; ++b)
      band_start[b] = b * height / stuff_classes + (height >= 2 * stuff_classes
                                                        ? rng.uniform_int(3) - 1
                                                        : 0);
    for (int b = 0; b < stuff_classes; ++b) {
      int lo = std::clamp(band_start[b], 0, height);
      int hi = std::clamp(band_start[b + 1], lo, height);
      if (b == 0) lo = 0;
      if (b == stuff_classes - 1) hi = height;
      for (int r = lo; r < hi; ++r)
        for (int c = 0; c < width; ++c) owner[r * width + c] = -1 - b;
    }
    bool ok = true;
    for (int k = 0; k < num_instances; ++k) {
      if (thing_classes < 1 || height < 2 || width < 2) {
        ok = false;
        break;
      }
      rect_class[k] = 1 + rng.uniform_int(thing_classes);
      int rh = 2 + rng.uniform_int(std::min(5, height - 1));
      int rw = 2 + rng.uniform_int(std::min(5, width - 1));
      int r0 = rng.uniform_int(height - rh + 1);
      int c0 = rng.uniform_int(width - rw + 1);
      for (int r = r0; r < r0 + rh; ++r)
        for (int c = c0; c < c0 + rw; ++c) owner[r * width + c] = k;
    }
    if (!ok) continue;
    // every instance must stay visible, and its visible part must be
    // 4-connected so that the reference labeling is reachable by merges
    std::vector<int> comp_of(nodes, -1);
    std::vector<int> stack;
    std::vector<int> comps(num_instances, 0);
    for (int start = 0; start < nodes; ++start) {
      if (owner[start] < 0 || comp_of[start] >= 0) continue;
      comps[owner[start]]++;
      stack.push_back(start);
      comp_of[start] = start;
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        int r = v / width, c = v % width;
        const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          int nr = r + dr[d], ncol = c + dc[d];
          if (nr < 0 || nr >= height || ncol < 0 || ncol >= width) continue;
          int u = nr * width + ncol;
          if (owner[u] != owner[v] || comp_of[u] >= 0) continue;
          comp_of[u] = start;
          stack.push_back(u);
        }
      }
    }
    placed = std::all_of(comps.begin(), comps.end(), [](int c) { return c == 1; });
  }
  if (!placed) throw std::runtime_error("impossible placement");

  SyntheticTask t;
  t.height = height;
  t.width = width;
  t.skeleton.num_nodes = nodes;
  t.skeleton.num_classes = num_classes;
  t.skeleton.edges = grid_graph(height, width, kTaskDistances);
  t.skeleton.node_costs.assign((size_t)nodes * num_classes, 0.0);
  t.skeleton.edge_costs.assign(t.skeleton.edges.size(), 0.0);
  t.skeleton.partitionable.assign(num_classes + 1, 0);
  for (int k = 1; k <= thing_classes; ++k) t.skeleton.partitionable[k] = 1;

  // reference segments, dense ids by first occurrence
  std::vector<int> owner_to_seg(num_instances + stuff_classes, 0);
  t.gt.segment_id.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    int key = owner[i] >= 0 ? owner[i] : num_instances + (-owner[i] - 1);
    if (owner_to_seg[key] == 0) {
      int cls = owner[i] >= 0 ? rect_class[owner[i]] : thing_classes + (-owner[i]);
      t.gt.segment_class.push_back(cls);
      owner_to_seg[key] = (int)t.gt.segment_class.size();
    }
    t.gt.segment_id[i] = owner_to_seg[key];
  }
  double area_scale = (double)nodes / 256.0;
  t.gt.area_threshold.assign(num_classes + 1, 0.0);
  for (int k = 1; k <= num_classes; ++k)
    t.gt.area_threshold[k] = (k <= thing_classes ? 25.0 : 100.0) * area_scale;

  Rng noise_rng(derive_seed(seed, 12));
  t.node_feat_dim = num_classes;
  t.node_features.resize((size_t)nodes * num_classes);
  std::vector<int> node_cls = gt_node_classes(t.gt);
  for (int i = 0; i < nodes; ++i)
    for (int k = 1; k <= num_classes; ++k)
      t.node_features[(size_t)i * num_classes + (k - 1)] =
          (node_cls[i] == k ? 1.0 : 0.0) + noise * noise_rng.normal();

  t.edge_feat_dim = (int)kTaskDistances.size();
  t.edge_features.resize(t.skeleton.edges.size() * kTaskDistances.size());
  for (size_t e = 0; e < t.skeleton.edges.size(); ++e) {
    auto [a, b] = t.skeleton.edges[e];
    int band = distance_band(t, a, b);
    double base = t.gt.segment_id[a] == t.gt.segment_id[b] ? 1.0 : -1.0;
    for (int f = 0; f < t.edge_feat_dim; ++f)
      t.edge_features[e * kTaskDistances.size() + f] =
          (f == band ? base : 0.0) + noise * noise_rng.normal();
  }
  return t;
}

LinearCostModel LinearCostModel::zeros(int num_classes, int node_feat_dim, int edge_feat_dim) {
  LinearCostModel m;
  m.num_classes = num_classes;
  m.node_feat_dim = node_feat_dim;
  m.edge_feat_dim = edge_feat_dim;
  m.w_node.assign((size_t)num_classes * node_feat_dim, 0.0);
  m.b_node.assign(num_classes, 0.0);
  m.w_edge.assign(edge_feat_dim, 0.0);
  return m;
}

LinearCostModel LinearCostModel::identity(int num_classes, int edge_feat_dim) {
  LinearCostModel m = zeros(num_classes, num_classes, edge_feat_dim);
  for (int k = 0; k < num_classes; ++k) m.w_node[(size_t)k * num_classes + k] = -1.0;
  for (double& w : m.w_edge) w = 1.0;
  return m;
}

LinearCostModel LinearCostModel::damped(int num_classes, int edge_feat_dim, double damp) {
  LinearCostModel m = zeros(num_classes, num_classes, edge_feat_dim);
  for (int k = 0; k < num_classes; ++k) m.w_node[(size_t)k * num_classes + k] = -damp;
  return m;
}

void LinearCostModel::apply(const SyntheticTask& task, std::vector<double>& node_costs,
                            std::vector<double>& edge_costs) const {
  int n = task.skeleton.num_nodes;
  node_costs.assign((size_t)n * num_classes, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* f = &task.node_features[(size_t)i * node_feat_dim];
    for (int k = 0; k < num_classes; ++k) {
      double v = b_node[k];
      const double* w = &w_node[(size_t)k * node_feat_dim];
      for (int j = 0; j < node_feat_dim; ++j) v += w[j] * f[j];
      node_costs[(size_t)i * num_classes + k] = v;
    }
  }
  edge_costs.assign(task.skeleton.edges.size(), 0.0);
  for (size_t e = 0; e < edge_costs.size(); ++e) {
    const double* f = &task.edge_features[e * edge_feat_dim];
    double v = b_edge;
    for (int j = 0; j < edge_feat_dim; ++j) v += w_edge[j] * f[j];
    edge_costs[e] = v;
  }
}

CostGraph LinearCostModel::instantiate(const SyntheticTask& task) const {
  CostGraph g = task.skeleton;
  apply(task, g.node_costs, g.edge_costs);
  return g;
}

std::string serialize_model(const LinearCostModel& m) {
  std::string out = "MODEL " + std::to_string(m.num_classes) + " " +
                    std::to_string(m.node_feat_dim) + " " + std::to_string(m.edge_feat_dim) +
                    "\n";
  for (int k = 0; k < m.num_classes; ++k) {
    out += "WN";
    for (int j = 0; j < m.node_feat_dim; ++j)
      out += " " + format_double(m.w_node[(size_t)k * m.node_feat_dim + j]);
    out += "\n";
  }
  out += "BN";
  for (double v : m.b_node) out += " " + format_double(v);
  out += "\nWE";
  for (double v : m.w_edge) out += " " + format_double(v);
  out += "\nBE " + format_double(m.b_edge) + "\n";
  return out;
}

LinearCostModel parse_model_text(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  LinearCostModel m;
  if (!(in >> tag >> m.num_classes >> m.node_feat_dim >> m.edge_feat_dim) || tag != "MODEL")
    throw std::runtime_error("malformed model file");
  m.w_node.resize((size_t)m.num_classes * m.node_feat_dim);
  m.b_node.resize(m.num_classes);
  m.w_edge.resize(m.edge_feat_dim);
  for (int k = 0; k < m.num_classes; ++k) {
    in >> tag;
    if (tag != "WN") throw std::runtime_error("malformed model file");
    for (int j = 0; j < m.node_feat_dim; ++j) in >> m.w_node[(size_t)k * m.node_feat_dim + j];
  }
  in >> tag;
  if (tag != "BN") throw std::runtime_error("malformed model file");
  for (double& v : m.b_node) in >> v;
  in >> tag;
  if (tag != "WE") throw std::runtime_error("malformed model file");
  for (double& v : m.w_edge) in >> v;
  in >> tag >> m.b_edge;
  if (tag != "BE" || !in) throw std::runtime_error("malformed model file");
  return m;
}

namespace {

void drop_entries(std::vector<double>& values, std::vector<uint8_t>& mask, double rate,
                  uint64_t seed) {
  mask.assign(values.size(), 0);
  int count = (int)(rate * (double)values.size());
  if (count <= 0) return;
  Rng rng(seed);
  std::vector<int> idx(values.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = (int)i;
  for (int i = 0; i < count; ++i) {
    int j = i + rng.uniform_int((int)idx.size() - i);
    std::swap(idx[i], idx[j]);
    values[idx[i]] = 0.0;
    mask[idx[i]] = 1;
  }
}

}  // namespace

DropoutMask cost_dropout(std::vector<double>& node_costs, std::vector<double>& edge_costs,
                         double rate, uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0,1)");
  DropoutMask m;
  drop_entries(node_costs, m.node, rate, derive_seed(seed, 1));
  drop_entries(edge_costs, m.edge, rate, derive_seed(seed, 2));
  return m;
}

std::string format_log_entry(const TrainLogEntry& e) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "iter=%d loss=%.12g pq_train=%.12g pq_eval=%.12g", e.iter,
                e.loss, e.pq_train, e.pq_eval);
  return buf;
}

Labeling solve_task(const SyntheticTask& task, const LinearCostModel& model) {
  return solve(model.instantiate(task));
}

double mean_exact_pq(const std::vector<SyntheticTask>& tasks, const LinearCostModel& model,
                     int workers) {
  if (tasks.empty()) return std::nan("");
  std::vector<double> pq(tasks.size());
  parallel_for((int)tasks.size(), workers, [&](int i) {
    Labeling lab = solve_task(tasks[i], model);
    pq[i] = pq_exact(lab.segment_id, lab.segment_class, tasks[i].gt).mean;
  });
  double sum = 0.0;
  for (double v : pq) sum += v;
  return sum / (double)tasks.size();
}

namespace {

struct ParamGrad {
  std::vector<double> w_node, b_node, w_edge;
  double b_edge = 0.0;

  static ParamGrad zeros(const LinearCostModel& m) {
    ParamGrad g;
    g.w_node.assign(m.w_node.size(), 0.0);
    g.b_node.assign(m.b_node.size(), 0.0);
    g.w_edge.assign(m.w_edge.size(), 0.0);
    return g;
  }
  void add(const ParamGrad& o, double s) {
    for (size_t i = 0; i < w_node.size(); ++i) w_node[i] += s * o.w_node[i];
    for (size_t i = 0; i < b_node.size(); ++i) b_node[i] += s * o.b_node[i];
    for (size_t i = 0; i < w_edge.size(); ++i) w_edge[i] += s * o.w_edge[i];
    b_edge += s * o.b_edge;
  }
};

// chain the cost gradient through the linear model
ParamGrad chain_to_params(const LinearCostModel& m, const SyntheticTask& task,
                          const CostGradient& cg) {
  ParamGrad g = ParamGrad::zeros(m);
  int n = task.skeleton.num_nodes;
  for (int i = 0; i < n; ++i) {
    const double* f = &task.node_features[(size_t)i * m.node_feat_dim];
    for (int k = 0; k < m.num_classes; ++k) {
      double d = cg.d_node[(size_t)i * m.num_classes + k];
      if (d == 0.0) continue;
      double* wr = &g.w_node[(size_t)k * m.node_feat_dim];
      for (int j = 0; j < m.node_feat_dim; ++j) wr[j] += d * f[j];
      g.b_node[k] += d;
    }
  }
  for (size_t e = 0; e < task.skeleton.edges.size(); ++e) {
    double d = cg.d_edge[e];
    if (d == 0.0) continue;
    const double* f = &task.edge_features[e * m.edge_feat_dim];
    for (int j = 0; j < m.edge_feat_dim; ++j) g.w_edge[j] += d * f[j];
    g.b_edge += d;
  }
  return g;
}

}  // namespace

TrainResult train(const std::vector<SyntheticTask>& tasks,
                  const std::vector<SyntheticTask>& eval_tasks, LinearCostModel model,
                  const TrainConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("no training tasks");
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("negative learning rate");
  TrainResult res;
  int batch = std::min<int>(cfg.batch_size, (int)tasks.size());
  if (batch < 1) throw std::invalid_argument("batch size must be >= 1");

  ParamGrad adam_m = ParamGrad::zeros(model), adam_v = ParamGrad::zeros(model);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<ParamGrad> grads((size_t)batch);
    std::vector<double> losses(batch, 0.0), pqs(batch, 0.0);

    parallel_for(batch, cfg.workers, [&](int slot) {
      const SyntheticTask& task = tasks[((size_t)iter * batch + slot) % tasks.size()];
      CostGraph g = task.skeleton;
      model.apply(task, g.node_costs, g.edge_costs);
      DropoutMask mask = cost_dropout(g.node_costs, g.edge_costs, cfg.dropout,
                                      derive_seed(cfg.seed, 1000 + iter, slot));
      Labeling fwd = solve(g);
      pqs[slot] = pq_exact(fwd.segment_id, fwd.segment_class, task.gt).mean;

      PerturbConfig pc = cfg.perturb;
      pc.seed = derive_seed(cfg.seed, 2000 + iter, slot);
      pc.workers = 1;  // batch slots already run in parallel

      CostGradient cg;
      if (cfg.loss == LossKind::surrogate) {
        SurrogateResult sur = pq_surrogate(fwd.segment_id, fwd.segment_class, task.gt);
        losses[slot] = cfg.loss_scale * (1.0 - sur.mean);
        SegmentGradient dz = pq_surrogate_grad(fwd.segment_id, fwd.segment_class, task.gt,
                                               sur.match, cfg.loss_scale);
        std::vector<int> extra;
        if (pc.lift_unmatched_gt)
          for (auto& cm : sur.match.by_class)
            for (size_t i = 0; i < cm.unmatched_gt.size(); ++i) extra.push_back(cm.cls);
        cg = backward_robust(g, fwd, dz, pc, extra);
      } else if (cfg.loss == LossKind::node) {
        std::vector<int> x_gt = gt_node_classes(task.gt);
        losses[slot] = cfg.loss_scale * node_loss(fwd, x_gt);
        cg = backward_node_loss_robust(g, fwd, x_gt, pc, cfg.loss_scale);
      } else {
        std::vector<uint8_t> y_gt = gt_edge_cuts(g, task.gt);
        losses[slot] = cfg.loss_scale * edge_loss(fwd, y_gt);
        cg = backward_edge_loss_robust(g, fwd, y_gt, pc, cfg.loss_scale);
      }
      // dropped cost entries are constants, so their gradient is zero
      for (size_t i = 0; i < mask.node.size(); ++i)
        if (mask.node[i]) cg.d_node[i] = 0.0;
      for (size_t i = 0; i < mask.edge.size(); ++i)
        if (mask.edge[i]) cg.d_edge[i] = 0.0;
      grads[slot] = chain_to_params(model, task, cg);
    });

    ParamGrad total = ParamGrad::zeros(model);
    double loss_sum = 0.0, pq_sum = 0.0;
    for (int s = 0; s < batch; ++s) {
      total.add(grads[s], 1.0 / batch);
      loss_sum += losses[s];
      pq_sum += pqs[s];
    }
    double loss = loss_sum / batch;
    if (!std::isfinite(loss))
      throw std::runtime_error("non-finite loss at iteration " + std::to_string(iter));

    TrainLogEntry entry;
    entry.iter = iter;
    entry.loss = loss;
    entry.pq_train = pq_sum / batch;
    entry.pq_eval = mean_exact_pq(eval_tasks, model, cfg.workers);
    res.log.push_back(entry);

    auto step = [&](std::vector<double>& w, std::vector<double>& gm, std::vector<double>& gv,
                    const std::vector<double>& grad) {
      for (size_t i = 0; i < w.size(); ++i) {
        if (cfg.adam) {
          gm[i] = cfg.adam_beta1 * gm[i] + (1.0 - cfg.adam_beta1) * grad[i];
          gv[i] = cfg.adam_beta2 * gv[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
          double mh = gm[i] / (1.0 - std::pow(cfg.adam_beta1, iter + 1));
          double vh = gv[i] / (1.0 - std::pow(cfg.adam_beta2, iter + 1));
          w[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
        } else {
          w[i] -= cfg.learning_rate * grad[i];
        }
      }
    };
    step(model.w_node, adam_m.w_node, adam_v.w_node, total.w_node);
    step(model.b_node, adam_m.b_node, adam_v.b_node, total.b_node);
    step(model.w_edge, adam_m.w_edge, adam_v.w_edge, total.w_edge);
    std::vector<double> be{model.b_edge}, bem{adam_m.b_edge}, bev{adam_v.b_edge},
        beg{total.b_edge};
    step(be, bem, bev, beg);
    model.b_edge = be[0];
    adam_m.b_edge = bem[0];
    adam_v.b_edge = bev[0];
  }
  res.model = std::move(model);
  return res;
}

double cross_entropy_loss(const std::vector<SyntheticTask>& tasks, const LinearCostModel& model) {
  double total = 0.0;
  std::vector<double> nc, ec;
  for (auto& task : tasks) {
    model.apply(task, nc, ec);
    std::vector<int> cls = gt_node_classes(task.gt);
    int n = task.skeleton.num_nodes, k = model.num_classes;
    double task_loss = 0.0;
    for (int i = 0; i < n; ++i) {
      double mx = -nc[(size_t)i * k];
      for (int c = 1; c < k; ++c) mx = std::max(mx, -nc[(size_t)i * k + c]);
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(-nc[(size_t)i * k + c] - mx);
      double logit = -nc[(size_t)i * k + (cls[i] - 1)] - mx;
      task_loss += std::log(sum) - logit;
    }
    total += task_loss / n;
  }
  return total / tasks.size();
}

LinearCostModel pretrain_cross_entropy(const std::vector<SyntheticTask>& tasks,
                                       LinearCostModel model, int iterations, double lr) {
  if (tasks.empty()) throw std::invalid_argument("no training tasks");
  std::vector<double> nc, ec;
  for (int it = 0; it < iterations; ++it) {
    ParamGrad total = ParamGrad::zeros(model);
    for (auto& task : tasks) {
      model.apply(task, nc, ec);
      std::vector<int> cls = gt_node_classes(task.gt);
      int n = task.skeleton.num_nodes, k = model.num_classes;
      CostGradient cg;
      cg.d_node.assign((size_t)n * k, 0.0);
      cg.d_edge.assign(task.skeleton.edges.size(), 0.0);
      for (int i = 0; i < n; ++i) {
        double mx = -nc[(size_t)i * k];
        for (int c = 1; c < k; ++c) mx = std::max(mx, -nc[(size_t)i * k + c]);
        double sum = 0.0;
        for (int c = 0; c < k; ++c) sum += std::exp(-nc[(size_t)i * k + c] - mx);
        for (int c = 0; c < k; ++c) {
          double p = std::exp(-nc[(size_t)i * k + c] - mx) / sum;
          double one = cls[i] == c + 1 ? 1.0 : 0.0;
          // d(cross entropy)/d(cost) = (onehot - softmax) since logits = -costs
          cg.d_node[(size_t)i * k + c] = (one - p) / n;
        }
      }
      total.add(chain_to_params(model, task, cg), 1.0 / tasks.size());
    }
    for (size_t i = 0; i < model.w_node.size(); ++i)
      model.w_node[i] -= lr * total.w_node[i];
    for (size_t i = 0; i < model.b_node.size(); ++i)
      model.b_node[i] -= lr * total.b_node[i];
  }
  return model;
}

}  // namespace amwc
