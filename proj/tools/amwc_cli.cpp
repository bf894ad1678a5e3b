// Command line front end: solve instances, evaluate solutions against
// references, run gradient checks, train the synthetic harness, generate
// tasks, and render solutions as PGM images.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "amwc/exact_oracle.hpp"
#include "amwc/gradcheck.hpp"
#include "amwc/instance_io.hpp"
#include "amwc/panoptic.hpp"
#include "amwc/solver.hpp"
#include "amwc/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << data;
}

int cmd_solve(const std::string& instance_path, const std::string& out_path, bool oracle) {
  std::string text;
  amwc::CostGraph g;
  try {
    text = read_file(instance_path);
    g = amwc::parse_instance_text(text);
    auto errs = amwc::validate_graph(g);
    if (!errs.empty()) {
      std::cerr << "invalid instance: " << errs.front() << "\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  amwc::Labeling lab;
  try {
    lab = oracle ? amwc::brute_force(g) : amwc::solve(g);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;  // oracle size limit
  }
  auto errs = amwc::check_labeling(g, lab);
  if (!errs.empty()) {
    std::cerr << "internal invariant violation: " << errs.front() << "\n";
    return kExitInternal;
  }
  std::string out;
  amwc::GridDims dims = amwc::scan_grid_comment(text);
  if (dims.present()) out += amwc::grid_comment(dims.height, dims.width);
  out += amwc::serialize_solution(lab);
  if (out_path.empty())
    std::cout << out;
  else
    write_file(out_path, out);
  return kExitOk;
}

int cmd_eval(const std::string& solution_path, const std::string& gt_path) {
  amwc::Solution sol;
  amwc::GroundTruth gt;
  try {
    sol = amwc::parse_solution_text(read_file(solution_path));
    gt = amwc::parse_ground_truth_text(read_file(gt_path));
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  if (sol.segment_id.size() != gt.segment_id.size()) {
    std::cerr << "node count mismatch: solution " << sol.segment_id.size() << ", reference "
              << gt.segment_id.size() << "\n";
    return kExitUsage;
  }
  try {
    amwc::PqResult pq = amwc::pq_exact(sol.segment_id, sol.segment_class, gt);
    amwc::SurrogateResult sur = amwc::pq_surrogate(sol.segment_id, sol.segment_class, gt);
    for (auto& c : pq.per_class)
      std::printf("class=%d pq=%.6f sq=%.6f tp=%d fp=%d fn=%d\n", c.cls, c.pq, c.sq, c.tp,
                  c.fp, c.fn);
    std::printf("overall pq=%.6f pq_soft=%.6f\n", pq.mean, sur.mean);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_gradcheck(uint64_t seed, double lambda_min, double lambda_max, int n, int oracle_nodes,
                  bool inject_iou_sign_flip) {
  amwc::CheckOptions opt;
  opt.seed = seed;
  opt.perturb.lambda_min = lambda_min;
  opt.perturb.lambda_max = lambda_max;
  opt.perturb.num_samples = n;
  opt.oracle_nodes = oracle_nodes;
  if (inject_iou_sign_flip) opt.grad_opts.iou_path_scale = -1.0;

  if (opt.oracle_nodes > amwc::kOracleMaxNodes) {
    std::cerr << "oracle size limit\n";
    return kExitUsage;
  }
  std::vector<amwc::CheckResult> results;
  try {
    results = amwc::run_gradient_checks(opt);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  bool all_ok = true;
  for (auto& r : results) {
    std::printf("check %-18s max_error=%-12.3g %s\n", r.name.c_str(), r.max_error,
                r.passed ? "ok" : "FAIL");
    if (!r.passed) {
      all_ok = false;
      std::printf("  %s mismatch: %s\n", r.name.c_str(), r.detail.c_str());
    }
  }
  return all_ok ? kExitOk : kExitCheckFailure;
}

struct TrainFileConfig {
  int tasks = 16, eval_tasks = 8;
  int height = 16, width = 16, instances = 4;
  int thing_classes = 2, stuff_classes = 2;
  double noise = 0.6;
  int pretrain_iterations = 300;
  double pretrain_lr = 2.0;
  double damp = 0.25;
  amwc::TrainConfig train;
};

bool parse_train_config(const std::string& text, TrainFileConfig& cfg, std::string& err) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      err = "line " + std::to_string(line_no) + ": expected key=value";
      return false;
    }
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    try {
      if (key == "tasks") cfg.tasks = std::stoi(value);
      else if (key == "eval_tasks") cfg.eval_tasks = std::stoi(value);
      else if (key == "height") cfg.height = std::stoi(value);
      else if (key == "width") cfg.width = std::stoi(value);
      else if (key == "instances") cfg.instances = std::stoi(value);
      else if (key == "thing_classes") cfg.thing_classes = std::stoi(value);
      else if (key == "stuff_classes") cfg.stuff_classes = std::stoi(value);
      else if (key == "noise") cfg.noise = std::stod(value);
      else if (key == "pretrain_iterations") cfg.pretrain_iterations = std::stoi(value);
      else if (key == "pretrain_lr") cfg.pretrain_lr = std::stod(value);
      else if (key == "damp") cfg.damp = std::stod(value);
      else if (key == "iterations") cfg.train.iterations = std::stoi(value);
      else if (key == "batch") cfg.train.batch_size = std::stoi(value);
      else if (key == "lr") cfg.train.learning_rate = std::stod(value);
      else if (key == "w") cfg.train.loss_scale = std::stod(value);
      else if (key == "lambda_min") cfg.train.perturb.lambda_min = std::stod(value);
      else if (key == "lambda_max") cfg.train.perturb.lambda_max = std::stod(value);
      else if (key == "n") cfg.train.perturb.num_samples = std::stoi(value);
      else if (key == "dropout") cfg.train.dropout = std::stod(value);
      else if (key == "seed") cfg.train.seed = (uint64_t)std::stoull(value);
      else if (key == "workers") cfg.train.workers = std::stoi(value);
      else if (key == "adam") cfg.train.adam = value == "1" || value == "true";
      else if (key == "lift_gt") cfg.train.perturb.lift_unmatched_gt = value == "1" || value == "true";
      else if (key == "loss") {
        if (value == "surrogate") cfg.train.loss = amwc::LossKind::surrogate;
        else if (value == "node") cfg.train.loss = amwc::LossKind::node;
        else if (value == "edge") cfg.train.loss = amwc::LossKind::edge;
        else {
          err = "line " + std::to_string(line_no) + ": unknown loss '" + value + "'";
          return false;
        }
      } else {
        err = "line " + std::to_string(line_no) + ": unknown config key '" + key + "'";
        return false;
      }
    } catch (const std::exception&) {
      err = "line " + std::to_string(line_no) + ": unparsable value for '" + key + "'";
      return false;
    }
  }
  return true;
}

struct TrainOverrides {
  std::optional<uint64_t> seed;
  std::optional<double> lambda_min, lambda_max, dropout;
  std::optional<int> num_samples, workers;
};

int cmd_train(const std::string& config_path, const std::string& model_out,
              const std::string& log_out, const TrainOverrides& ov) {
  TrainFileConfig cfg;
  std::string err;
  try {
    if (!parse_train_config(read_file(config_path), cfg, err)) {
      std::cerr << err << "\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  if (ov.seed) cfg.train.seed = *ov.seed;
  if (ov.lambda_min) cfg.train.perturb.lambda_min = *ov.lambda_min;
  if (ov.lambda_max) cfg.train.perturb.lambda_max = *ov.lambda_max;
  if (ov.num_samples) cfg.train.perturb.num_samples = *ov.num_samples;
  if (ov.dropout) cfg.train.dropout = *ov.dropout;
  if (ov.workers) cfg.train.workers = *ov.workers;

  try {
    std::vector<amwc::SyntheticTask> tasks, eval_tasks;
    for (int i = 0; i < cfg.tasks; ++i)
      tasks.push_back(amwc::gen_task(amwc::derive_seed(cfg.train.seed, 50, i), cfg.height,
                                     cfg.width, cfg.instances, cfg.thing_classes,
                                     cfg.stuff_classes, cfg.noise));
    for (int i = 0; i < cfg.eval_tasks; ++i)
      eval_tasks.push_back(amwc::gen_task(amwc::derive_seed(cfg.train.seed, 51, i), cfg.height,
                                          cfg.width, cfg.instances, cfg.thing_classes,
                                          cfg.stuff_classes, cfg.noise));

    int num_classes = cfg.thing_classes + cfg.stuff_classes;
    amwc::LinearCostModel model =
        amwc::LinearCostModel::damped(num_classes, (int)amwc::kTaskDistances.size(), cfg.damp);
    model = amwc::pretrain_cross_entropy(tasks, model, cfg.pretrain_iterations, cfg.pretrain_lr);

    amwc::TrainResult result = amwc::train(tasks, eval_tasks, model, cfg.train);

    std::string log;
    for (auto& e : result.log) log += amwc::format_log_entry(e) + "\n";
    if (log_out.empty())
      std::cout << log;
    else
      write_file(log_out, log);
    if (!model_out.empty()) write_file(model_out, amwc::serialize_model(result.model));
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_gen(uint64_t seed, int height, int width, int instances, int thing_classes,
            int stuff_classes, double noise, const std::string& out_path,
            const std::string& gt_path) {
  try {
    amwc::SyntheticTask task =
        amwc::gen_task(seed, height, width, instances, thing_classes, stuff_classes, noise);
    amwc::LinearCostModel model = amwc::LinearCostModel::identity(
        thing_classes + stuff_classes, (int)amwc::kTaskDistances.size());
    amwc::CostGraph g = model.instantiate(task);
    std::string out = amwc::grid_comment(height, width) + amwc::serialize_instance(g);
    if (out_path.empty())
      std::cout << out;
    else
      write_file(out_path, out);
    if (!gt_path.empty()) write_file(gt_path, amwc::serialize_ground_truth(task.gt));
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_render(const std::string& solution_path, const std::string& out_path) {
  try {
    std::string text = read_file(solution_path);
    amwc::GridDims dims = amwc::scan_grid_comment(text);
    amwc::Solution sol = amwc::parse_solution_text(text);
    if (!dims.present() ||
        (size_t)dims.height * dims.width != sol.segment_id.size()) {
      std::cerr << "solution lacks matching grid dimensions\n";
      return kExitUsage;
    }
    std::string img = "P5\n" + std::to_string(dims.width) + " " + std::to_string(dims.height) +
                      "\n255\n";
    for (int z : sol.segment_id) {
      double gray = (double)z * 255.0 / sol.num_segments;
      img.push_back((char)(unsigned char)std::floor(gray + 0.5));
    }
    write_file(out_path, img);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymmetric multiway cut toolkit"};
  app.require_subcommand(1);

  auto* solve_cmd = app.add_subcommand("solve", "solve an instance file");
  std::string instance_path, out_path, gt_path, config_path, solution_path, log_path, model_path;
  bool oracle = false;
  solve_cmd->add_option("instance", instance_path)->required();
  solve_cmd->add_option("--out", out_path);
  solve_cmd->add_flag("--oracle", oracle, "exact search instead of the heuristic");

  auto* eval_cmd = app.add_subcommand("eval", "score a solution against a reference");
  eval_cmd->add_option("solution", solution_path)->required();
  eval_cmd->add_option("reference", gt_path)->required();

  uint64_t seed = 1;
  double lambda_min = 1.0, lambda_max = 5.0;
  int n = 3, oracle_nodes = 6;
  bool inject = false;
  auto* check_cmd = app.add_subcommand("gradcheck", "run gradient and metric checks");
  check_cmd->add_option("--seed", seed);
  check_cmd->add_option("--lambda-min", lambda_min);
  check_cmd->add_option("--lambda-max", lambda_max);
  check_cmd->add_option("--n", n);
  check_cmd->add_option("--oracle-nodes", oracle_nodes);
  check_cmd->add_flag("--inject-iou-sign-flip", inject)->group("");  // fault-injection hook

  auto* train_cmd = app.add_subcommand("train", "train the synthetic harness");
  train_cmd->add_option("config", config_path)->required();
  train_cmd->add_option("--out-model", model_path);
  train_cmd->add_option("--log", log_path);
  TrainOverrides ov;
  train_cmd->add_option("--seed", ov.seed, "override the config seed");
  train_cmd->add_option("--lambda-min", ov.lambda_min);
  train_cmd->add_option("--lambda-max", ov.lambda_max);
  train_cmd->add_option("--n", ov.num_samples);
  train_cmd->add_option("--dropout", ov.dropout);
  train_cmd->add_option("--workers", ov.workers);

  int height = 16, width = 16, instances = 4, thing_classes = 2, stuff_classes = 2;
  double noise = 0.0;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic instance");
  gen_cmd->add_option("--seed", seed);
  gen_cmd->add_option("--height", height);
  gen_cmd->add_option("--width", width);
  gen_cmd->add_option("--instances", instances);
  gen_cmd->add_option("--thing-classes", thing_classes);
  gen_cmd->add_option("--stuff-classes", stuff_classes);
  gen_cmd->add_option("--noise", noise);
  gen_cmd->add_option("--out", out_path);
  gen_cmd->add_option("--gt", gt_path);

  auto* render_cmd = app.add_subcommand("render", "write a solution as a PGM image");
  render_cmd->add_option("solution", solution_path)->required();
  render_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (solve_cmd->parsed()) return cmd_solve(instance_path, out_path, oracle);
  if (eval_cmd->parsed()) return cmd_eval(solution_path, gt_path);
  if (check_cmd->parsed())
    return cmd_gradcheck(seed, lambda_min, lambda_max, n, oracle_nodes, inject);
  if (train_cmd->parsed()) return cmd_train(config_path, model_path, log_path, ov);
  if (gen_cmd->parsed())
    return cmd_gen(seed, height, width, instances, thing_classes, stuff_classes, noise,
                   out_path, gt_path);
  if (render_cmd->parsed()) return cmd_render(solution_path, out_path);
  return kExitUsage;
}
