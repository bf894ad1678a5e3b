#include <cmath>

#include "amwc/gradcheck.hpp"
#include "amwc/panoptic.hpp"
#include "amwc/rng.hpp"
#include "doctest.h"

using namespace amwc;

namespace {

GroundTruth make_gt(std::vector<int> z, std::vector<int> classes, double threshold) {
  GroundTruth gt;
  gt.segment_id = std::move(z);
  gt.segment_class = std::move(classes);
  int max_cls = 0;
  for (int c : gt.segment_class) max_cls = std::max(max_cls, c);
  gt.area_threshold.assign(max_cls + 1, threshold);
  gt.area_threshold[0] = 0.0;
  return gt;
}

// two segments per side, both classes matched at IoU 0.6 with areas equal to
// their class thresholds
struct PairFixture {
  std::vector<int> z_pred{}, pred_class{};
  GroundTruth gt;
  PairFixture() {
    std::vector<int> z_gt(16);
    for (int i = 0; i < 16; ++i) z_gt[i] = i < 10 ? 1 : 2;
    gt = make_gt(z_gt, {1, 2}, 1.0);
    gt.area_threshold = {0.0, 6.0, 10.0};
    z_pred.resize(16);
    for (int i = 0; i < 16; ++i) z_pred[i] = i < 6 ? 1 : 2;
    pred_class = {1, 2};
  }
};

}  // namespace

TEST_CASE("iou fixtures") {
  std::vector<uint8_t> a = {1, 1, 0, 0}, b = {1, 1, 0, 0};
  CHECK(iou(a, b) == doctest::Approx(1.0));
  std::vector<uint8_t> c = {0, 0, 1, 1};
  CHECK(iou(a, c) == doctest::Approx(0.0));
  std::vector<uint8_t> p(16, 0), g(16, 0);
  for (int i = 0; i < 6; ++i) p[i] = 1;
  for (int i = 0; i < 10; ++i) g[i] = 1;
  CHECK(iou(p, g) == doctest::Approx(0.6));
  CHECK_THROWS(iou(a, p));
}

TEST_CASE("match_hard on a perfect prediction") {
  std::vector<int> z = {1, 1, 2, 2};
  GroundTruth gt = make_gt({1, 1, 2, 2}, {1, 2}, 1.0);
  MatchSet m = match_hard(z, {1, 2}, gt);
  REQUIRE(m.by_class.size() == 2);
  for (auto& cm : m.by_class) {
    REQUIRE(cm.matches.size() == 1);
    CHECK(cm.matches[0].iou == doctest::Approx(1.0));
    CHECK(cm.unmatched_pred.empty());
    CHECK(cm.unmatched_gt.empty());
  }
}

TEST_CASE("match_hard with no predictions leaves all references unmatched") {
  std::vector<int> z = {1, 1, 1, 1};
  GroundTruth gt = make_gt({1, 1, 2, 2}, {1, 1}, 1.0);
  MatchSet m = match_hard(z, {2}, gt);  // prediction is another class entirely
  for (auto& cm : m.by_class) {
    if (cm.cls == 1) {
      CHECK(cm.matches.empty());
      CHECK(cm.unmatched_gt.size() == 2);
    }
  }
}

TEST_CASE("match_hard keeps only the above-threshold pair") {
  // one prediction overlapping two references of its class at 0.6 and 0.2
  int n = 18;
  std::vector<int> z_gt(n), z_pred(n);
  for (int i = 0; i < n; ++i) z_gt[i] = i < 12 ? 1 : 2;
  for (int i = 0; i < n; ++i) z_pred[i] = (i < 9 || (i >= 12 && i < 15)) ? 1 : 2;
  GroundTruth gt = make_gt(z_gt, {1, 1}, 1.0);
  MatchSet m = match_hard(z_pred, {1, 2}, gt);
  for (auto& cm : m.by_class) {
    if (cm.cls != 1) continue;
    REQUIRE(cm.matches.size() == 1);
    CHECK(cm.matches[0].gt == 1);
    CHECK(cm.matches[0].iou == doctest::Approx(0.6));
    CHECK(cm.unmatched_gt == std::vector<int>{2});
  }
}

TEST_CASE("pq_exact fixtures") {
  std::vector<int> z = {1, 1, 2, 2};
  GroundTruth gt = make_gt({1, 1, 2, 2}, {1, 2}, 1.0);
  CHECK(pq_exact(z, {1, 2}, gt).mean == doctest::Approx(1.0));

  // no predictions of class 1 against one reference segment
  GroundTruth gt2 = make_gt({1, 1, 1, 1}, {1}, 1.0);
  PqResult r = pq_exact({1, 1, 1, 1}, {2}, gt2);
  for (auto& c : r.per_class)
    if (c.cls == 1) CHECK(c.pq == doctest::Approx(0.0));

  PairFixture fx;
  PqResult r3 = pq_exact(fx.z_pred, fx.pred_class, fx.gt);
  for (auto& c : r3.per_class) CHECK(c.pq == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r3.mean == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("match_soft has no threshold and maximizes total weight") {
  // single pair at IoU 0.3 is still matched
  std::vector<int> z_pred(10, 1);
  std::vector<int> z_gt(10);
  for (int i = 0; i < 10; ++i) z_gt[i] = i < 3 ? 1 : 2;
  GroundTruth gt = make_gt(z_gt, {1, 2}, 1.0);
  MatchSet m = match_soft(z_pred, {1}, gt);
  for (auto& cm : m.by_class)
    if (cm.cls == 1) {
      REQUIRE(cm.matches.size() == 1);
      CHECK(cm.matches[0].iou == doctest::Approx(0.3));
    }

  // weight matrix ((0.4, 0.5), (0.6, 0.1)) -> pairs (0,1) and (1,0)
  auto pairs = max_weight_matching(2, 2, {0.4, 0.5, 0.6, 0.1});
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == std::pair<int, int>{0, 1});
  CHECK(pairs[1] == std::pair<int, int>{1, 0});

  // no references: every prediction is a false positive
  GroundTruth gt3 = make_gt({1, 1, 1, 1}, {2}, 1.0);
  MatchSet m3 = match_soft({1, 1, 2, 2}, {1, 1}, gt3);
  for (auto& cm : m3.by_class)
    if (cm.cls == 1) CHECK(cm.unmatched_pred.size() == 2);

  // zero-overlap pairs stay unmatched
  GroundTruth gt4 = make_gt({1, 1, 2, 2}, {1, 2}, 1.0);
  MatchSet m4 = match_soft({1, 1, 2, 2}, {2, 1}, gt4);
  for (auto& cm : m4.by_class) {
    CHECK(cm.matches.empty());
    CHECK(cm.unmatched_pred.size() == 1);
    CHECK(cm.unmatched_gt.size() == 1);
  }
}

TEST_CASE("soft threshold fixtures") {
  CHECK(soft_threshold(0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(soft_threshold(0.0) == doctest::Approx(0.0));
  CHECK(soft_threshold(1.0) == doctest::Approx(1.0));
  CHECK(soft_threshold(0.9) == doctest::Approx(0.6561 / 0.6562).epsilon(1e-12));
  CHECK(soft_threshold(0.9) == doctest::Approx(0.999848).epsilon(1e-5));
  for (double u = 0.0; u < 1.0; u += 0.05)
    CHECK(soft_threshold(u + 0.05) > soft_threshold(u));  // monotone
}

TEST_CASE("area sigmoid fixtures") {
  CHECK(area_sigmoid(50.0, 50.0) == doctest::Approx(0.5));
  CHECK(area_sigmoid(150.0, 50.0) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
  CHECK(area_sigmoid(0.0, 200.0) == doctest::Approx(1.0 / (1.0 + std::exp(20.0))).epsilon(1e-12));
}

TEST_CASE("pq_surrogate fixtures") {
  // perfect prediction: numerator equals denominator per class
  std::vector<int> z = {1, 1, 2, 2};
  GroundTruth gt = make_gt({1, 1, 2, 2}, {1, 2}, 1.0);
  CHECK(pq_surrogate(z, {1, 2}, gt).mean == doctest::Approx(1.0).epsilon(1e-12));

  // no predictions of the reference class
  GroundTruth gt2 = make_gt({1, 1, 1, 1}, {1}, 1.0);
  gt2.area_threshold = {0.0, 1.0, 1.0};
  SurrogateResult r2 = pq_surrogate({1, 1, 1, 1}, {2}, gt2);
  for (auto& [cls, v] : r2.per_class)
    if (cls == 1) CHECK(v == doctest::Approx(0.0));

  // matched pair at IoU 0.6 with prediction area at the class threshold
  PairFixture fx;
  SurrogateResult r3 = pq_surrogate(fx.z_pred, fx.pred_class, fx.gt);
  for (auto& [cls, v] : r3.per_class) CHECK(v == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(r3.mean == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("surrogate gradient: scale zero gives a zero gradient") {
  PairFixture fx;
  SurrogateResult sur = pq_surrogate(fx.z_pred, fx.pred_class, fx.gt);
  SegmentGradient g = pq_surrogate_grad(fx.z_pred, fx.pred_class, fx.gt, sur.match, 0.0);
  CHECK(g.all_zero());
}

TEST_CASE("surrogate gradient: false positives are pushed to shrink") {
  int n = 20;
  std::vector<int> z_gt(n), z_pred(n);
  for (int i = 0; i < n; ++i) z_gt[i] = i < 10 ? 1 : 2;
  for (int i = 0; i < n; ++i) z_pred[i] = i < 10 ? 1 : (i < 15 ? 2 : 3);
  GroundTruth gt = make_gt(z_gt, {1, 2}, 5.0);
  std::vector<int> pred_class = {1, 1, 2};  // segment 2 is a class-1 false positive
  SurrogateResult sur = pq_surrogate(z_pred, pred_class, gt);
  SegmentGradient g = pq_surrogate_grad(z_pred, pred_class, gt, sur.match, 1.0);
  for (int i = 0; i < n; ++i) CHECK(g.at(i, 2) > 0.0);
}

TEST_CASE("surrogate gradient matches finite differences on relaxed masks") {
  for (int trial = 0; trial < 3; ++trial) {
    CheckOptions opt;
    opt.seed = derive_seed(19, trial);
    opt.fd_instances = 5;
    auto results = run_gradient_checks(opt);
    for (auto& r : results)
      if (r.name == "fd-gradient") {
        CHECK(r.passed);
        CHECK(r.max_error <= 1e-4);
      }
  }
}

TEST_CASE("surrogate approaches the exact metric on confident predictions") {
  int n = 600;
  std::vector<int> z_gt(n), z_pred(n);
  for (int i = 0; i < n; ++i) z_gt[i] = i < 300 ? 1 : 2;
  for (int i = 0; i < n; ++i) z_pred[i] = i < 310 ? 1 : 2;
  GroundTruth gt = make_gt(z_gt, {1, 1}, 1.0);
  std::vector<int> pred_class = {1, 1};
  double exact = pq_exact(z_pred, pred_class, gt).mean;
  double soft = pq_surrogate(z_pred, pred_class, gt).mean;
  CHECK(std::abs(exact - soft) <= 0.01);
  CHECK(exact > 0.9);
}

TEST_CASE("instance_score fixtures") {
  CostGraph g;
  g.num_nodes = 2;
  g.num_classes = 1;
  g.edges = {{0, 1}};
  g.node_costs = {0.0, 0.0};
  g.edge_costs = {4.0};
  g.partitionable = {0, 1};
  CHECK(instance_score({1, 0}, 1, g) == doctest::Approx(4.0));

  CostGraph h;
  h.num_nodes = 3;
  h.num_classes = 1;
  h.edges = {{0, 1}, {1, 2}};
  h.node_costs = {2.0, 4.0, 9.0};
  h.edge_costs = {0.0, 0.0};
  h.partitionable = {0, 1};
  CHECK(instance_score({1, 1, 0}, 1, h) == doctest::Approx(3.0));

  h.node_costs = {0.0, 0.0, 0.0};
  h.edge_costs = {2.0, 2.0};
  CHECK(instance_score({1, 1, 0}, 1, h) == doctest::Approx(0.0));
  CHECK_THROWS(instance_score({0, 0, 0}, 1, h));
}
