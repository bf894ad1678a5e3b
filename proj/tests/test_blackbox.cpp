#include <cmath>
#include <stdexcept>

#include "amwc/blackbox.hpp"
#include "amwc/gradcheck.hpp"
#include "amwc/panoptic.hpp"
#include "amwc/rng.hpp"
#include "amwc/solver.hpp"
#include "doctest.h"

using namespace amwc;

namespace {

// two nodes, one free cost entry theta = node 0's class-1 cost; node 1 is
// pinned to class 1, the edge is neutral. For theta > 0 the solution is two
// segments: node 0 alone with class 2, node 1 with class 1.
CostGraph sweep_graph(double theta) {
  CostGraph g;
  g.num_nodes = 2;
  g.num_classes = 2;
  g.edges = {{0, 1}};
  g.node_costs = {theta, 0.0, -10.0, 10.0};
  g.edge_costs = {0.0};
  g.partitionable = {0, 1, 1};
  return g;
}

SegmentGradient zero_like(const CostGraph& g, const Labeling& fwd) {
  SegmentGradient dz;
  dz.num_nodes = g.num_nodes;
  dz.num_segments = fwd.num_segments();
  dz.d.assign((size_t)dz.num_nodes * dz.num_segments, 0.0);
  return dz;
}

bool gradient_zero(const CostGradient& cg) {
  for (double v : cg.d_node)
    if (v != 0.0) return false;
  for (double v : cg.d_edge)
    if (v != 0.0) return false;
  return true;
}

}  // namespace

TEST_CASE("backward_panoptic: zero incoming gradient means zero output") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    CostGraph g = random_instance(rng);
    Labeling fwd = solve(g);
    SegmentGradient dz = zero_like(g, fwd);
    CHECK(gradient_zero(backward_panoptic(g, fwd, dz, 3.0)));
    PerturbConfig cfg{0.5, 4.0, 4, (uint64_t)trial, false, 1};
    CHECK(gradient_zero(backward_robust(g, fwd, dz, cfg)));
  }
}

TEST_CASE("backward_panoptic: a decisive push flips exactly one node") {
  double theta = 0.5, lambda = 1.0;
  CostGraph g = sweep_graph(theta);
  Labeling fwd = solve(g);
  REQUIRE(fwd.num_segments() == 2);
  REQUIRE(fwd.node_class == std::vector<int>{2, 1});

  SegmentGradient dz = zero_like(g, fwd);
  dz.at(0, 1) = 1.0;  // leaving segment 1 lowers the loss
  CostGradient cg = backward_panoptic(g, fwd, dz, lambda);
  CHECK(cg.d_node[0] == doctest::Approx(1.0 / lambda));   // node 0, class 1
  CHECK(cg.d_node[1] == doctest::Approx(-1.0 / lambda));  // node 0, class 2
  CHECK(cg.d_node[2] == 0.0);
  CHECK(cg.d_node[3] == 0.0);
  CHECK(cg.d_edge[0] == doctest::Approx(-1.0 / lambda));
}

TEST_CASE("backward_panoptic: entries are bounded by 2/lambda") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    CostGraph g = random_instance(rng);
    Labeling fwd = solve(g);
    SegmentGradient dz = zero_like(g, fwd);
    for (double& v : dz.d) v = rng.uniform(-2.0, 2.0);
    double lambda = rng.uniform(0.2, 50.0);
    CostGradient cg = backward_panoptic(g, fwd, dz, lambda);
    for (double v : cg.d_node) CHECK(std::abs(v) <= 2.0 / lambda);
    for (double v : cg.d_edge) CHECK(std::abs(v) <= 2.0 / lambda);
  }
}

TEST_CASE("backward_panoptic rejects bad arguments") {
  CostGraph g = sweep_graph(0.5);
  Labeling fwd = solve(g);
  SegmentGradient dz = zero_like(g, fwd);
  CHECK_THROWS_AS(backward_panoptic(g, fwd, dz, 0.0), std::invalid_argument);
  dz.num_segments += 1;
  dz.d.resize((size_t)dz.num_nodes * dz.num_segments);
  CHECK_THROWS_AS(backward_panoptic(g, fwd, dz, 1.0), std::invalid_argument);
}

TEST_CASE("backward_robust degenerates to a single sample") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    CostGraph g = random_instance(rng);
    Labeling fwd = solve(g);
    SegmentGradient dz = zero_like(g, fwd);
    for (double& v : dz.d) v = rng.uniform(-1.0, 1.0);
    PerturbConfig cfg{2.5, 2.5, 1, 9, false, 1};
    CostGradient a = backward_robust(g, fwd, dz, cfg);
    CostGradient b = backward_panoptic(g, fwd, dz, 2.5);
    CHECK(a.d_node == b.d_node);
    CHECK(a.d_edge == b.d_edge);
  }
}

TEST_CASE("backward_robust is deterministic and parallel-invariant") {
  Rng rng(8);
  CostGraph g = random_instance(rng);
  Labeling fwd = solve(g);
  SegmentGradient dz = zero_like(g, fwd);
  for (double& v : dz.d) v = rng.uniform(-1.0, 1.0);
  PerturbConfig cfg{1.0, 10.0, 5, 1234, false, 1};
  CostGradient a = backward_robust(g, fwd, dz, cfg);
  CostGradient b = backward_robust(g, fwd, dz, cfg);
  cfg.workers = 4;
  CostGradient c = backward_robust(g, fwd, dz, cfg);
  CHECK(a.d_node == b.d_node);
  CHECK(a.d_edge == b.d_edge);
  CHECK(a.d_node == c.d_node);
  CHECK(a.d_edge == c.d_edge);
}

TEST_CASE("sampled magnitudes cover the configured interval") {
  PerturbConfig cfg{1.0, 50.0, 64, 77, false, 1};
  auto ls = sample_lambdas(cfg);
  REQUIRE(ls.size() == 64);
  for (double l : ls) {
    CHECK(l >= 1.0);
    CHECK(l < 50.0);
  }
  PerturbConfig point{3.0, 3.0, 2, 5, false, 1};
  for (double l : sample_lambdas(point)) CHECK(l == doctest::Approx(3.0));
}

TEST_CASE("node loss and its gradient at the reference labeling") {
  Rng rng(10);
  for (int trial = 0; trial < 25; ++trial) {
    CostGraph g = random_instance(rng);
    Labeling fwd = solve(g);
    // reference equal to the forward labels: loss 0, gradient 0, and the
    // re-solve sees an identical instance
    CHECK(node_loss(fwd, fwd.node_class) == doctest::Approx(0.0));
    CostGradient cg = backward_node_loss(g, fwd, fwd.node_class, 2.0);
    CHECK(gradient_zero(cg));

    std::vector<uint8_t> y_gt = fwd.edge_cut;
    CHECK(edge_loss(fwd, y_gt) == doctest::Approx(0.0));
    auto eg = edge_loss_grad(fwd, y_gt);
    for (double v : eg) CHECK(std::isfinite(v));
  }
}

TEST_CASE("node loss counts mismatches") {
  CostGraph g = sweep_graph(0.5);
  Labeling fwd = solve(g);  // classes (2, 1)
  std::vector<int> x_gt = {2, 2};
  CHECK(node_loss(fwd, x_gt) == doctest::Approx(1.0));  // one of two nodes off
  auto ng = node_loss_grad(fwd, x_gt, 2);
  CHECK(ng[2] == doctest::Approx(0.5));   // node 1 current class 1
  CHECK(ng[3] == doctest::Approx(-0.5));  // node 1 target class 2
}

TEST_CASE("zero perturbation vectors re-solve to the forward labeling") {
  Rng rng(12);
  for (int trial = 0; trial < 25; ++trial) {
    CostGraph g = random_instance(rng);
    Labeling fwd = solve(g);
    std::vector<double> zn((size_t)g.num_nodes * g.num_classes, 0.0);
    std::vector<double> ze(g.edges.size(), 0.0);
    CHECK(gradient_zero(backward_perturb_node(g, fwd, zn, 1.5)));
    CHECK(gradient_zero(backward_perturb_edge(g, fwd, ze, 1.5)));
  }
}

TEST_CASE("extra label slots let nodes move to absent classes") {
  // forward solution occupies classes 2 and 3; class 1 only becomes
  // reachable in the relabeling solve when appended as an extra slot
  CostGraph g;
  g.num_nodes = 2;
  g.num_classes = 3;
  g.edges = {{0, 1}};
  g.node_costs = {0.0, -5.0, 10.0, 0.0, 10.0, -8.0};
  g.edge_costs = {3.0};
  g.partitionable = {0, 1, 1, 1};
  Labeling fwd = solve(g);
  REQUIRE(fwd.node_class == std::vector<int>{2, 3});
  REQUIRE(fwd.num_segments() == 2);

  SegmentGradient dz = zero_like(g, fwd);
  dz.at(1, 2) = 2.0;  // push node 1 out of its segment
  double lambda = 5.0;

  CostGradient plain = backward_panoptic(g, fwd, dz, lambda);
  CHECK(gradient_zero(plain));  // no better slot among the occupied classes

  std::vector<int> extra = {1};
  CostGradient lifted = backward_panoptic(g, fwd, dz, lambda, extra);
  CHECK(lifted.d_node[(size_t)1 * 3 + 0] == doctest::Approx(1.0 / lambda));   // class 1 up
  CHECK(lifted.d_node[(size_t)1 * 3 + 2] == doctest::Approx(-1.0 / lambda));  // class 3 down
  CHECK(lifted.d_edge[0] == 0.0);  // both solutions cut the edge
}

TEST_CASE("estimator support width scales linearly with lambda") {
  for (double lambda : {0.5, 1.0, 2.0}) {
    double push = 1.0;
    double predicted = lambda * push;
    double step = predicted / 400.0;
    int nonzero = 0;
    for (double theta = step * 0.5; theta < 1.6 * predicted; theta += step) {
      CostGraph g = sweep_graph(theta);
      Labeling fwd = solve(g);
      REQUIRE(fwd.num_segments() == 2);
      SegmentGradient dz = zero_like(g, fwd);
      dz.at(0, 1) = push;
      CostGradient cg = backward_panoptic(g, fwd, dz, lambda);
      if (!gradient_zero(cg)) nonzero++;
    }
    double measured = nonzero * step;
    CHECK(std::abs(measured - predicted) <= 0.1 * predicted);
  }
}

TEST_CASE("gradient steps rarely increase the surrogate loss") {
  Rng rng(14);
  int trials = 0, ok = 0;
  while (trials < 100) {
    RandomInstanceOptions opt;
    opt.max_nodes = 24;
    opt.max_classes = 3;
    CostGraph g = random_instance(rng, opt);
    GroundTruth gt = random_ground_truth(rng, g.num_nodes, 4, g.num_classes);
    Labeling fwd = solve(g);
    SurrogateResult sur = pq_surrogate(fwd.segment_id, fwd.segment_class, gt);
    double loss = 1.0 - sur.mean;
    if (loss < 1e-6) continue;  // already minimal
    trials++;

    SegmentGradient dz =
        pq_surrogate_grad(fwd.segment_id, fwd.segment_class, gt, sur.match, 1.0);
    PerturbConfig cfg{1.0, 5.0, 5, (uint64_t)trials, false, 1};
    CostGradient cg = backward_robust(g, fwd, dz, cfg);

    CostGraph stepped = g;
    double lr = 0.05;
    for (size_t i = 0; i < stepped.node_costs.size(); ++i)
      stepped.node_costs[i] -= lr * cg.d_node[i];
    Labeling fwd2 = solve(stepped);
    double loss2 = 1.0 - pq_surrogate(fwd2.segment_id, fwd2.segment_class, gt).mean;
    if (loss2 <= loss + 1e-12) ok++;
  }
  CHECK(ok >= 80);
}
