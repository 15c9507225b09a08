#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gvg/serialize.hpp"

using namespace gvg;

TEST_CASE("scene JSON round-trips") {
  const Scene scene = generate_scene(9, GeneratorConfig{});
  const Scene back = scene_from_json(scene_to_json(scene));
  REQUIRE(back.id == scene.id);
  REQUIRE(back.grid_h == scene.grid_h);
  REQUIRE(back.expression == scene.expression);
  REQUIRE(back.non_target == scene.non_target);
  REQUIRE(back.instances.size() == scene.instances.size());
  for (std::size_t i = 0; i < scene.instances.size(); ++i) {
    REQUIRE(back.instances[i].kind == scene.instances[i].kind);
    REQUIRE(back.instances[i].box.cx == scene.instances[i].box.cx);
    REQUIRE(back.instances[i].box.h == scene.instances[i].box.h);
    REQUIRE(back.instances[i].attributes == scene.instances[i].attributes);
  }
  // and the serialized form is stable
  REQUIRE(scene_to_json(back).dump() == scene_to_json(scene).dump());
}

TEST_CASE("scene JSON rejects unknown shape kinds") {
  json j = scene_to_json(generate_scene(10, GeneratorConfig{}));
  if (j["instances"].empty()) return;
  j["instances"][0]["kind"] = "triangle";
  REQUIRE_THROWS_AS(scene_from_json(j), std::invalid_argument);
}

TEST_CASE("run config round-trips through JSON with exact defaults") {
  RunConfig cfg;
  REQUIRE(cfg.n_q == 10);
  REQUIRE(cfg.w_dist == 0.003);
  REQUIRE(cfg.match.cls == 1.0);
  REQUIRE(cfg.match.box == 5.0);
  REQUIRE(cfg.match.giou == 2.0);
  REQUIRE(cfg.match.point == 2.0);
  REQUIRE(cfg.loss.detr == 0.1);
  REQUIRE(cfg.loss.seg == 1.0);
  REQUIRE(cfg.loss.instance == 1.0);
  REQUIRE(cfg.loss.exist == 0.2);
  REQUIRE(cfg.loss.neg == 0.2);
  REQUIRE(cfg.thr_q == 0.9);
  REQUIRE(cfg.thr_m == 0.5);
  REQUIRE_FALSE(cfg.nms);

  cfg.n_q = 7;
  cfg.w_dist = 0.01;
  cfg.seed = 1234;
  cfg.generator.non_target_rate = 0.4;
  const json j = config_to_json(cfg);
  const RunConfig back = config_from_json(j);
  REQUIRE(config_to_json(back).dump() == j.dump());
  REQUIRE(back.n_q == 7);
  REQUIRE(back.w_dist == 0.01);
  REQUIRE(back.seed == 1234);
  REQUIRE(back.generator.non_target_rate == 0.4);
}

TEST_CASE("partial config files keep defaults for missing fields") {
  const RunConfig cfg = config_from_json(json::parse(R"({"n_q": 5})"));
  REQUIRE(cfg.n_q == 5);
  REQUIRE(cfg.w_dist == 0.003);
  REQUIRE(cfg.thr_q == 0.9);
}

TEST_CASE("config validation catches bad settings") {
  RunConfig cfg;
  cfg.image_size = 20;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.n_q = 100;  // more queries than 8x8 feature cells
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.heads = 3;  // does not divide 16 channels
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.levels = 5;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("run-length masks round-trip") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 8);
    const int w = 1 + static_cast<int>(rng() % 8);
    BinaryMask m = BinaryMask::zeros(h, w);
    for (auto& v : m.data) v = rng() % 2;
    const std::vector<int> counts = rle_encode(m);
    const BinaryMask back = rle_decode(counts, h, w);
    REQUIRE(back.data == m.data);
    // counts alternate starting from zeros
    int total = 0;
    for (int c : counts) total += c;
    REQUIRE(total == h * w);
  }
  REQUIRE(rle_encode(BinaryMask::zeros(2, 2)) == std::vector<int>{4});
  REQUIRE_THROWS_AS(rle_decode({5}, 2, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(rle_decode({3}, 2, 2), std::invalid_argument);
}

TEST_CASE("prediction records round-trip") {
  FinalOutput out;
  out.kept = {1, 4};
  out.detections = {{1, {0.4, 0.5, 0.2, 0.3}, 0.93}, {4, {0.7, 0.2, 0.1, 0.1}, 0.91}};
  out.mask = BinaryMask::zeros(4, 4);
  out.mask.at(2, 2) = 1;
  out.non_target = false;
  const std::vector<Point> points = {{0.25, 0.5}, {0.75, 0.5}};
  const json j = prediction_to_json(12, out, points, 0.97);
  const PredictionRecord rec = prediction_from_json(j);
  REQUIRE(rec.id == 12);
  REQUIRE(rec.existence == 0.97);
  REQUIRE(rec.output.kept == out.kept);
  REQUIRE(rec.output.detections.size() == 2);
  REQUIRE(rec.output.detections[1].box.cx == 0.7);
  REQUIRE(rec.output.detections[0].score == 0.93);
  REQUIRE(rec.output.mask.data == out.mask.data);
  REQUIRE(rec.points.size() == 2);
  REQUIRE(rec.points[1].x == 0.75);
}

TEST_CASE("ground-truth predictions evaluate to perfect metrics") {
  GeneratorConfig gen;
  gen.non_target_rate = 0.25;
  std::vector<SceneRecord> records;
  for (int seed = 0; seed < 40; ++seed) {
    const Scene scene = generate_scene(seed, gen);
    const SceneGroundTruth gt = rasterize_ground_truth(scene, 16, 16);
    SceneRecord r;
    for (const InstanceTruth& inst : gt.instances) {
      r.boxes.push_back(inst.box);
      r.scores.push_back(1.0);
    }
    r.mask = gt.global_mask;
    r.predicted_non_target = gt.instances.empty();
    for (const InstanceTruth& inst : gt.instances) r.gt_boxes.push_back(inst.box);
    r.gt_mask = gt.global_mask;
    r.gt_non_target = gt.instances.empty();
    records.push_back(std::move(r));
  }
  REQUIRE(grec_f1(records).f1score == 1.0);
  REQUIRE(grec_f1(records).n_acc == 1.0);
  REQUIRE(gres_iou(records).g_iou == 1.0);
  REQUIRE(gres_iou(records).c_iou == 1.0);
  REQUIRE(zom_metrics(records).acc == 1.0);
  REQUIRE(robust_metrics(records).m_rr == 1.0);
  REQUIRE(robust_metrics(records).r_iou == 1.0);
}

TEST_CASE("empty predictions on an all-positive set score zero f1") {
  GeneratorConfig gen;
  gen.non_target_rate = 0.0;
  gen.min_instances = 1;
  std::vector<SceneRecord> records;
  for (int seed = 0; seed < 10; ++seed) {
    const Scene scene = generate_scene(seed, gen);
    const SceneGroundTruth gt = rasterize_ground_truth(scene, 16, 16);
    SceneRecord r;
    r.mask = BinaryMask::zeros(16, 16);
    r.predicted_non_target = true;
    for (const InstanceTruth& inst : gt.instances) r.gt_boxes.push_back(inst.box);
    r.gt_mask = gt.global_mask;
    r.gt_non_target = false;
    records.push_back(std::move(r));
  }
  REQUIRE(grec_f1(records).f1score == 0.0);
}

TEST_CASE("loss history CSV has one row per step") {
  std::vector<LossReport> history(3);
  history[1].total = 1.5;
  const std::string csv = loss_history_to_csv(history);
  REQUIRE(csv.find("step,detr,seg,instance,exist,total\n") == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);
}
