#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "gvg/matcher.hpp"
#include "gvg/testing/oracles.hpp"

using namespace gvg;

namespace {

DecodedQuerySet preds_with(const std::vector<BoxCxCyWh>& boxes, const std::vector<Point>& points,
                           const Vec& fg_logits) {
  DecodedQuerySet d;
  d.count = static_cast<int>(boxes.size());
  d.channels = 1;
  d.boxes = boxes;
  d.ref_points = points;
  d.fg_logits = fg_logits;
  return d;
}

SceneGroundTruth gt_with(const std::vector<BoxCxCyWh>& boxes) {
  SceneGroundTruth gt;
  for (const BoxCxCyWh& b : boxes) gt.instances.push_back({b, BinaryMask::zeros(2, 2)});
  return gt;
}

}  // namespace

TEST_CASE("identical boxes have GIoU 1") {
  const BoxCxCyWh b{0.4, 0.6, 0.2, 0.3};
  REQUIRE(giou(b, b) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("distant disjoint boxes have negative GIoU") {
  const BoxCxCyWh a{0.05, 0.05, 0.1, 0.1};
  const BoxCxCyWh b{0.95, 0.95, 0.1, 0.1};
  REQUIRE(giou(a, b) < 0.0);
}

TEST_CASE("GIoU matches manual area arithmetic") {
  // a: [0, 0.5] x [0, 0.5], b: [0.25, 0.75] x [0, 0.5]
  const BoxCxCyWh a{0.25, 0.25, 0.5, 0.5};
  const BoxCxCyWh b{0.5, 0.25, 0.5, 0.5};
  const double inter = 0.25 * 0.5;        // [0.25, 0.5] x [0, 0.5]
  const double uni = 0.25 + 0.25 - inter; // 0.375
  const double hull = 0.75 * 0.5;         // [0, 0.75] x [0, 0.5]
  const double expect = inter / uni - (hull - uni) / hull;
  REQUIRE(giou(a, b) == Catch::Approx(expect).margin(1e-12));
  REQUIRE(box_iou(a, b) == Catch::Approx(inter / uni).margin(1e-12));
}

TEST_CASE("with zero point weight the cost is the DETR cost") {
  const std::vector<BoxCxCyWh> pb = {{0.3, 0.3, 0.2, 0.2}, {0.7, 0.7, 0.3, 0.3}};
  const std::vector<Point> points = {{0.1, 0.1}, {0.9, 0.9}};
  const Vec logits = {0.4, -0.3};
  const DecodedQuerySet preds = preds_with(pb, points, logits);
  const SceneGroundTruth gt = gt_with({{0.32, 0.28, 0.22, 0.18}});

  CostWeights w;
  w.point = 0.0;
  const CostMatrix cost = build_cost(preds, gt, w);
  for (int q = 0; q < 2; ++q) {
    const double fg = sigmoid(logits[static_cast<std::size_t>(q)]);
    const double expect = 1.0 * -std::log(fg) + 5.0 * box_l1(pb[static_cast<std::size_t>(q)], gt.instances[0].box) +
                          2.0 * (1.0 - giou(pb[static_cast<std::size_t>(q)], gt.instances[0].box));
    REQUIRE(cost.at(q, 0) == Catch::Approx(expect).margin(1e-12));
  }
}

TEST_CASE("a perfect prediction has zero cost") {
  const BoxCxCyWh b{0.5, 0.5, 0.2, 0.4};
  const DecodedQuerySet preds = preds_with({b}, {{0.5, 0.5}}, {1e9});  // fg prob -> 1
  const SceneGroundTruth gt = gt_with({b});
  const CostMatrix cost = build_cost(preds, gt, CostWeights{});
  REQUIRE(cost.at(0, 0) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("default weights match the documented constants term by term") {
  const CostWeights w;
  REQUIRE(w.cls == 1.0);
  REQUIRE(w.box == 5.0);
  REQUIRE(w.giou == 2.0);
  REQUIRE(w.point == 2.0);

  const std::vector<BoxCxCyWh> pb = {{0.45, 0.5, 0.25, 0.3}};
  const std::vector<Point> points = {{0.4, 0.45}};
  const Vec logits = {0.25};
  const DecodedQuerySet preds = preds_with(pb, points, logits);
  const BoxCxCyWh tb{0.5, 0.55, 0.2, 0.35};
  const SceneGroundTruth gt = gt_with({tb});
  const CostMatrix cost = build_cost(preds, gt, w);

  const double ce = -std::log(sigmoid(0.25));
  const double l1 = std::abs(0.45 - 0.5) + std::abs(0.5 - 0.55) + std::abs(0.25 - 0.2) +
                    std::abs(0.3 - 0.35);
  const double g = giou(pb[0], tb);
  const double pl1 = std::abs(0.4 - 0.5) + std::abs(0.45 - 0.55);
  REQUIRE(cost.at(0, 0) ==
          Catch::Approx(1.0 * ce + 5.0 * l1 + 2.0 * (1.0 - g) + 2.0 * pl1).margin(1e-12));
}

TEST_CASE("build_cost rejects empty ground truth") {
  const DecodedQuerySet preds = preds_with({{0.5, 0.5, 0.2, 0.2}}, {{0.5, 0.5}}, {0.0});
  SceneGroundTruth gt;
  REQUIRE_THROWS_AS(build_cost(preds, gt, CostWeights{}), std::invalid_argument);
}

TEST_CASE("hungarian solves the classic 2x2 case") {
  CostMatrix cost;
  cost.n_queries = 2;
  cost.n_targets = 2;
  cost.data = {1.0, 2.0, 2.0, 1.0};
  const Assignment a = hungarian(cost);
  REQUIRE(a.query_to_target == std::vector<int>{0, 1});
}

TEST_CASE("hungarian picks a dominant diagonal") {
  CostMatrix cost;
  cost.n_queries = 3;
  cost.n_targets = 3;
  cost.data = {0.1, 5.0, 5.0, 5.0, 0.1, 5.0, 5.0, 5.0, 0.1};
  const Assignment a = hungarian(cost);
  REQUIRE(a.query_to_target == std::vector<int>{0, 1, 2});
}

TEST_CASE("all-equal costs break ties lexicographically") {
  CostMatrix cost;
  cost.n_queries = 3;
  cost.n_targets = 2;
  cost.data.assign(6, 3.5);
  const Assignment a = hungarian(cost);
  REQUIRE(a.query_to_target == std::vector<int>{0, 1, -1});
  REQUIRE(a.size() == 2);

  cost.n_queries = 2;
  cost.n_targets = 3;
  cost.data.assign(6, 3.5);
  const Assignment b = hungarian(cost);
  REQUIRE(b.query_to_target == std::vector<int>{0, 1});
}

TEST_CASE("hungarian equals the exhaustive minimum on random matrices") {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> dist(0.0, 4.0);
  for (int trial = 0; trial < 300; ++trial) {
    CostMatrix cost;
    cost.n_queries = 1 + static_cast<int>(rng() % 6);
    cost.n_targets = 1 + static_cast<int>(rng() % 6);
    cost.data.resize(static_cast<std::size_t>(cost.n_queries) * cost.n_targets);
    for (double& v : cost.data) v = dist(rng);
    const Assignment got = hungarian(cost);
    const auto want = testing::assignment_oracle(cost);
    double total = 0.0;
    for (int q = 0; q < cost.n_queries; ++q) {
      if (got.query_to_target[static_cast<std::size_t>(q)] >= 0) {
        total += cost.at(q, got.query_to_target[static_cast<std::size_t>(q)]);
      }
    }
    REQUIRE(total == want.best_total);
    REQUIRE(got.query_to_target == want.query_to_target);
    REQUIRE(got.size() == static_cast<std::size_t>(std::min(cost.n_queries, cost.n_targets)));
  }
}

TEST_CASE("adding a constant to every entry leaves the assignment unchanged") {
  std::mt19937_64 rng(72);
  std::uniform_real_distribution<double> dist(0.0, 4.0);
  for (int trial = 0; trial < 100; ++trial) {
    CostMatrix cost;
    cost.n_queries = 1 + static_cast<int>(rng() % 5);
    cost.n_targets = 1 + static_cast<int>(rng() % 5);
    cost.data.resize(static_cast<std::size_t>(cost.n_queries) * cost.n_targets);
    for (double& v : cost.data) v = dist(rng);
    CostMatrix shifted = cost;
    for (double& v : shifted.data) v += 17.5;
    REQUIRE(hungarian(cost).query_to_target == hungarian(shifted).query_to_target);
  }
}

TEST_CASE("the nearer prior point wins between otherwise identical queries") {
  const BoxCxCyWh pred_box{0.5, 0.5, 0.2, 0.2};
  const BoxCxCyWh target{0.52, 0.5, 0.2, 0.2};
  // query 1's prior point is nearer to the target center
  const DecodedQuerySet preds =
      preds_with({pred_box, pred_box}, {{0.1, 0.1}, {0.5, 0.5}}, {0.3, 0.3});
  const SceneGroundTruth gt = gt_with({target});

  for (double lp : {0.5, 2.0, 10.0}) {
    CostWeights w;
    w.point = lp;
    const Assignment a = hungarian(build_cost(preds, gt, w));
    REQUIRE(a.query_to_target == std::vector<int>{-1, 0});
  }
  CostWeights w0;
  w0.point = 0.0;
  const Assignment tie = hungarian(build_cost(preds, gt, w0));
  REQUIRE(tie.query_to_target == std::vector<int>{0, -1});
}

TEST_CASE("mask alignment propagates the box assignment unchanged") {
  Assignment q2b;
  q2b.query_to_target = {2, 0, -1};
  const Assignment q2m = align_masks(q2b, 3, 3);
  REQUIRE(q2m.query_to_target == q2b.query_to_target);

  Assignment empty;
  empty.query_to_target = {-1, -1};
  REQUIRE(align_masks(empty, 0, 0).size() == 0);

  REQUIRE_THROWS_AS(align_masks(q2b, 3, 2), std::invalid_argument);
}

TEST_CASE("box and mask pair index sets agree after propagation") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    CostMatrix cost;
    cost.n_queries = 1 + static_cast<int>(rng() % 5);
    cost.n_targets = 1 + static_cast<int>(rng() % 5);
    cost.data.resize(static_cast<std::size_t>(cost.n_queries) * cost.n_targets);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (double& v : cost.data) v = dist(rng);
    const Assignment q2b = hungarian(cost);
    const Assignment q2m = align_masks(q2b, cost.n_targets, cost.n_targets);
    REQUIRE(q2b.pairs() == q2m.pairs());
  }
}
