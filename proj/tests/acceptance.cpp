// Acceptance suite. Runs every criterion at its stated tolerance and prints
// one pass/fail line each; exits nonzero if any hard criterion fails.
// Criterion 8 is a soft comparison: its failure is reported but not fatal.
//
// Usage: acceptance [path-to-cli]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "amwc/blackbox.hpp"
#include "amwc/exact_oracle.hpp"
#include "amwc/gradcheck.hpp"
#include "amwc/instance_io.hpp"
#include "amwc/panoptic.hpp"
#include "amwc/rng.hpp"
#include "amwc/solver.hpp"
#include "amwc/train.hpp"

using namespace amwc;
namespace fs = std::filesystem;

namespace {

int hard_failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int criterion, bool passed, const std::string& detail, bool soft = false) {
  if (!passed && !soft) hard_failures++;
  std::printf("[%s] criterion %2d: %s\n",
              passed ? "PASS" : (soft ? "SOFT-FAIL" : "FAIL"), criterion, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

CostGraph corpus_instance(uint64_t seed, int index) {
  Rng rng(derive_seed(seed, 7100, index));
  RandomInstanceOptions opt;
  opt.max_nodes = 200;
  opt.max_classes = 6;
  return random_instance(rng, opt);
}

// ---------------------------------------------------------------- 1 and 2

void criterion_1_and_2() {
  Timer timer;
  const int count = 1000;
  int feasible = 0, descent_ok = 0;
  double max_merge_err = 0.0;
  for (int i = 0; i < count; ++i) {
    CostGraph g = corpus_instance(1, i);
    SolveTrace trace;
    Labeling lab = solve(g, &trace);
    if (is_feasible(g, lab)) feasible++;

    bool ok = true;
    double prev = trace.initial_objective;
    for (auto& m : trace.merges) {
      double err = std::abs((prev - m.objective_after) - m.t);
      max_merge_err = std::max(max_merge_err, err);
      if (err > 1e-9 || m.t < 0.0) ok = false;
      prev = m.objective_after;
    }
    // singleton objective: every node its own cluster at its best class,
    // every edge cut; the greedy loop never increases it
    if (prev > trace.initial_objective + 1e-9) ok = false;
    if (ok) descent_ok++;
  }
  double secs = timer.seconds();
  report(1, feasible == count && secs < 30.0,
         fmt("solver feasibility: %d/%d feasible in %.1fs (limit 30s)", feasible, count, secs));
  report(2, descent_ok == count,
         fmt("greedy descent: %d/%d instances, max per-merge error %.2e (tol 1e-9)",
             descent_ok, count, max_merge_err));
}

// --------------------------------------------------------------------- 3

void criterion_3() {
  Timer timer;
  const int general = 150, dominant = 50;
  int bound_ok = 0, equal_ok = 0;
  double worst_gap = 0.0;
  for (int i = 0; i < general; ++i) {
    Rng rng(derive_seed(3, 7300, i));
    RandomInstanceOptions opt;
    opt.max_nodes = 7;
    opt.max_classes = 3;
    CostGraph g = random_instance(rng, opt);
    double heur = solve(g).objective;
    double best = brute_force(g).objective;
    if (heur >= best - 1e-9) bound_ok++;
    worst_gap = std::max(worst_gap, best - heur);
  }
  for (int i = 0; i < dominant; ++i) {
    Rng rng(derive_seed(3, 7301, i));
    CostGraph g = random_dominant_instance(rng, 7, 3);
    double heur = solve(g).objective;
    double best = brute_force(g).objective;
    if (heur >= best - 1e-9) bound_ok++;
    if (std::abs(heur - best) <= 1e-9) equal_ok++;
  }
  double secs = timer.seconds();
  report(3, bound_ok == general + dominant && equal_ok == dominant && secs < 60.0,
         fmt("oracle bound: %d/%d bounded, %d/%d exact on the attractive sub-corpus, "
             "%.1fs (limit 60s)",
             bound_ok, general + dominant, equal_ok, dominant, secs));
}

// --------------------------------------------------------------------- 4

void criterion_4() {
  bool ok = true;
  std::string why;

  {  // perfect prediction scores exactly 1
    std::vector<int> z = {1, 1, 2, 2};
    GroundTruth gt;
    gt.segment_id = {1, 1, 2, 2};
    gt.segment_class = {1, 2};
    gt.area_threshold = {0.0, 1.0, 1.0};
    if (std::abs(pq_exact(z, {1, 2}, gt).mean - 1.0) > 1e-9) {
      ok = false;
      why += " perfect!=1";
    }
  }
  {  // matched pair at IoU 0.6 alone in its class
    std::vector<int> z_pred(16), z_gt(16);
    for (int i = 0; i < 16; ++i) z_pred[i] = i < 6 ? 1 : 2;
    for (int i = 0; i < 16; ++i) z_gt[i] = i < 10 ? 1 : 2;
    GroundTruth gt;
    gt.segment_id = z_gt;
    gt.segment_class = {1, 2};
    gt.area_threshold = {0.0, 6.0, 10.0};
    PqResult r = pq_exact(z_pred, {1, 2}, gt);
    for (auto& c : r.per_class)
      if (std::abs(c.pq - 0.6) > 1e-9) {
        ok = false;
        why += " pq(0.6-pair)!=0.6";
      }
    // surrogate value with prediction areas at the class thresholds
    SurrogateResult s = pq_surrogate(z_pred, {1, 2}, gt);
    if (std::abs(s.mean - 0.6) > 1e-9) {
      ok = false;
      why += " surrogate(0.6-pair)!=0.6";
    }
  }
  if (std::abs(soft_threshold(0.5) - 0.5) > 1e-9) {
    ok = false;
    why += " h(0.5)!=0.5";
  }
  if (std::abs(area_sigmoid(42.0, 42.0) - 0.5) > 1e-9) {
    ok = false;
    why += " sigma(t)!=0.5";
  }
  report(4, ok, "metric fixtures: perfect PQ, 0.6 pair, h(0.5), sigma at threshold, "
                "surrogate pair value" + (why.empty() ? "" : " |" + why));
}

// --------------------------------------------------------------------- 5

void criterion_5() {
  Timer timer;
  CheckOptions opt;
  opt.seed = 5;
  opt.fd_instances = 50;
  double max_rel = 0.0;
  bool passed = true;
  for (auto& r : run_gradient_checks(opt)) {
    if (r.name != "fd-gradient") continue;
    max_rel = r.max_error;
    passed = r.passed;
  }
  double secs = timer.seconds();
  report(5, passed && secs < 10.0,
         fmt("surrogate gradient vs finite differences: max relative error %.2e "
             "(tol 1e-4) on 50 instances in %.1fs (limit 10s)",
             max_rel, secs));
}

// --------------------------------------------------------------------- 6

void criterion_6() {
  // zero incoming gradient -> exactly zero cost gradient, all variants
  int zeros_ok = 0;
  const int count = 100;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(6, 7600, i));
    CostGraph g = random_instance(rng);
    Labeling fwd = solve(g);
    SegmentGradient dz;
    dz.num_nodes = g.num_nodes;
    dz.num_segments = fwd.num_segments();
    dz.d.assign((size_t)dz.num_nodes * dz.num_segments, 0.0);
    std::vector<double> zn((size_t)g.num_nodes * g.num_classes, 0.0);
    std::vector<double> ze(g.edges.size(), 0.0);
    PerturbConfig cfg{1.0, 10.0, 3, (uint64_t)i, false, 1};

    auto zero = [](const CostGradient& cg) {
      for (double v : cg.d_node)
        if (v != 0.0) return false;
      for (double v : cg.d_edge)
        if (v != 0.0) return false;
      return true;
    };
    bool all = zero(backward_panoptic(g, fwd, dz, 2.0)) &&
               zero(backward_robust(g, fwd, dz, cfg)) &&
               zero(backward_node_loss(g, fwd, fwd.node_class, 2.0)) &&
               zero(backward_perturb_node(g, fwd, zn, 2.0)) &&
               zero(backward_perturb_edge(g, fwd, ze, 2.0));
    if (all) zeros_ok++;
  }

  // interpolation width grows linearly in the perturbation magnitude
  bool widths_ok = true;
  std::string widths;
  for (double lambda : {0.5, 1.0, 2.0, 5.0}) {
    double push = 1.0;
    double predicted = lambda * push;
    double step = predicted / 400.0;
    int nonzero = 0;
    for (double theta = step * 0.5; theta < 1.5 * predicted; theta += step) {
      CostGraph g;
      g.num_nodes = 2;
      g.num_classes = 2;
      g.edges = {{0, 1}};
      g.node_costs = {theta, 0.0, -10.0, 10.0};
      g.edge_costs = {0.0};
      g.partitionable = {0, 1, 1};
      Labeling fwd = solve(g);
      SegmentGradient dz;
      dz.num_nodes = 2;
      dz.num_segments = 2;
      dz.d.assign(4, 0.0);
      dz.at(0, 1) = push;
      CostGradient cg = backward_panoptic(g, fwd, dz, lambda);
      bool nz = false;
      for (double v : cg.d_node) nz |= v != 0.0;
      for (double v : cg.d_edge) nz |= v != 0.0;
      if (nz) nonzero++;
    }
    double measured = nonzero * step;
    if (std::abs(measured - predicted) > 0.1 * predicted) widths_ok = false;
    widths += fmt(" l=%g:%.3f/%.3f", lambda, measured, predicted);
  }
  report(6, zeros_ok == count && widths_ok,
         fmt("blackbox estimator: zero-gradient %d/%d, sweep widths (measured/predicted)%s",
             zeros_ok, count, widths.c_str()));
}

// ------------------------------------------------------------- 7, 8, 9

struct TrainOutcome {
  double baseline = 0.0, final_pq = 0.0, final_loss = 0.0;
  std::vector<double> loss_curve;
};

TrainOutcome run_workload(uint64_t seed, int num_samples, int workers) {
  std::vector<SyntheticTask> tasks, eval_tasks;
  for (int i = 0; i < 64; ++i)
    tasks.push_back(gen_task(derive_seed(seed, 50, i), 16, 16, 4, 2, 2, 0.6));
  for (int i = 0; i < 16; ++i)
    eval_tasks.push_back(gen_task(derive_seed(seed, 51, i), 16, 16, 4, 2, 2, 0.6));

  LinearCostModel model = LinearCostModel::damped(4, (int)kTaskDistances.size(), 0.25);
  model = pretrain_cross_entropy(tasks, model, 300, 2.0);

  TrainOutcome out;
  out.baseline = mean_exact_pq(eval_tasks, model, workers);

  TrainConfig cfg;
  cfg.perturb = {1.0, 50.0, num_samples, 0, false, 1};
  cfg.loss_scale = 10.0;
  cfg.learning_rate = 0.05;
  cfg.iterations = 200;
  cfg.batch_size = 8;
  cfg.dropout = 0.1;
  cfg.seed = seed;
  cfg.workers = workers;
  TrainResult r = train(tasks, eval_tasks, model, cfg);
  out.final_pq = mean_exact_pq(eval_tasks, r.model, workers);
  for (auto& e : r.log) out.loss_curve.push_back(e.loss);
  double sum = 0.0;
  int tail = std::min<int>(10, (int)r.log.size());
  for (int i = 0; i < tail; ++i) sum += r.log[r.log.size() - 1 - i].loss;
  out.final_loss = sum / tail;
  return out;
}

void print_mean_curve(const char* label, const std::vector<TrainOutcome>& runs, int count) {
  std::string line = fmt("  loss curve %s:", label);
  size_t iters = runs[0].loss_curve.size();
  for (size_t i = 0; i < iters; i += 25) {
    double mean = 0.0;
    for (int r = 0; r < count; ++r) mean += runs[r].loss_curve[i] / count;
    line += fmt(" %zu:%.3f", i, mean);
  }
  double mean = 0.0;
  for (int r = 0; r < count; ++r) mean += runs[r].loss_curve.back() / count;
  line += fmt(" %zu:%.3f", iters - 1, mean);
  std::printf("%s\n", line.c_str());
}

void criteria_7_8_9(int workers) {
  Timer timer;
  std::vector<TrainOutcome> robust;  // N = 5, seeds 1..6
  for (uint64_t seed = 1; seed <= 6; ++seed)
    robust.push_back(run_workload(seed, 5, workers));
  double secs7 = timer.seconds();

  double mean_gain5 = 0.0;
  for (int i = 0; i < 5; ++i) mean_gain5 += (robust[i].final_pq - robust[i].baseline) / 5.0;
  report(7, mean_gain5 >= 0.05 && secs7 < 600.0,
         fmt("end-to-end: mean held-out PQ gain %+.4f over 5 seeds (need >= +0.05), "
             "%.0fs (limit 600s)",
             mean_gain5, secs7));

  Timer timer8;
  double loss5 = 0.0, loss1 = 0.0;
  std::vector<TrainOutcome> simple;  // N = 1
  for (int i = 0; i < 5; ++i) loss5 += robust[i].final_loss / 5.0;
  for (uint64_t seed = 1; seed <= 5; ++seed)
    simple.push_back(run_workload(seed, 1, workers));
  for (int i = 0; i < 5; ++i) loss1 += simple[i].final_loss / 5.0;
  bool soft_ok = loss5 <= loss1 + 0.01;
  report(8, soft_ok,
         fmt("robust vs simple (soft, non-fatal): mean final loss N=5 %.4f vs N=1 %.4f "
             "(need N5 <= N1 + 0.01), extra %.0fs",
             loss5, loss1, timer8.seconds()),
         /*soft=*/true);
  print_mean_curve("N=5", robust, 5);
  print_mean_curve("N=1", simple, 5);

  int improved = 0;
  std::string gains;
  for (auto& r : robust) {
    if (r.final_pq > r.baseline) improved++;
    gains += fmt(" %+.3f", r.final_pq - r.baseline);
  }
  report(9, improved == 6,
         fmt("reproducibility: %d/6 seeds improve over their baselines;%s", improved,
             gains.c_str()));
}

// -------------------------------------------------------------------- 10

std::string small_run(int workers) {
  std::vector<SyntheticTask> tasks;
  for (int i = 0; i < 6; ++i) tasks.push_back(gen_task(900 + i, 10, 10, 2, 2, 2, 0.6));
  std::vector<SyntheticTask> eval_tasks = {gen_task(990, 10, 10, 2, 2, 2, 0.6)};
  LinearCostModel model = LinearCostModel::damped(4, (int)kTaskDistances.size(), 0.25);
  model = pretrain_cross_entropy(tasks, model, 50, 1.5);
  TrainConfig cfg;
  cfg.perturb = {1.0, 20.0, 5, 0, false, 1};
  cfg.learning_rate = 0.03;
  cfg.iterations = 10;
  cfg.batch_size = 4;
  cfg.dropout = 0.1;
  cfg.seed = 31;
  cfg.workers = workers;
  TrainResult r = train(tasks, eval_tasks, model, cfg);
  std::string log;
  for (auto& e : r.log) log += format_log_entry(e) + "\n";
  return log + serialize_model(r.model);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_10(const std::string& cli) {
  std::string a = small_run(1), b = small_run(1), c = small_run(4);
  bool logs_ok = a == b && a == c;

  // solution files through the command line tool, twice
  bool files_ok = true;
  if (!cli.empty()) {
    fs::path work = fs::temp_directory_path() / "amwc_acceptance";
    fs::create_directories(work);
    Rng rng(4242);
    RandomInstanceOptions opt;
    opt.max_nodes = 60;
    CostGraph g = random_instance(rng, opt);
    std::ofstream(work / "det.amwc") << serialize_instance(g);
    for (int run = 0; run < 2; ++run) {
      std::string cmd = cli + " solve " + (work / "det.amwc").string() + " --out " +
                        (work / ("det" + std::to_string(run) + ".sol")).string();
      if (std::system(cmd.c_str()) != 0) files_ok = false;
    }
    files_ok = files_ok && slurp(work / "det0.sol") == slurp(work / "det1.sol") &&
               !slurp(work / "det0.sol").empty();
  }
  report(10, logs_ok && files_ok,
         fmt("determinism: logs identical across runs and 1 vs 4 workers (%s), solution "
             "files byte-identical (%s)",
             logs_ok ? "yes" : "no", files_ok ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  int workers = 4;

  criterion_1_and_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criteria_7_8_9(workers);
  criterion_10(cli);

  if (hard_failures == 0) {
    std::printf("all hard criteria passed\n");
    return 0;
  }
  std::printf("%d hard criterion(s) failed\n", hard_failures);
  return 1;
}
