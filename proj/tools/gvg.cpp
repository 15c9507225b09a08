// gvg - synthetic generalized visual grounding pipeline driver.
//
// Subcommands: synth, run, eval, fit-demo, selftest.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gvg/fit.hpp"
#include "gvg/pipeline.hpp"
#include "gvg/serialize.hpp"
#include "gvg/testing/oracles.hpp"

namespace fs = std::filesystem;
using gvg::json;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool dump_attn = false;
  bool dump_masks = false;
  int workers = 1;
};

gvg::RunConfig load_config(const GlobalOpts& opts) {
  gvg::RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = gvg::config_from_json(gvg::load_json_file(opts.config_path));
  }
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.validate();
  return cfg;
}

std::string scene_filename(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05lld.json", static_cast<long long>(index));
  return buf;
}

int cmd_synth(const GlobalOpts& opts, int count) {
  const gvg::RunConfig cfg = load_config(opts);
  if (opts.out.empty()) throw std::runtime_error("synth: --out is required");
  fs::create_directories(opts.out);
  json names = json::array();
  for (int i = 0; i < count; ++i) {
    gvg::Scene scene = gvg::generate_scene(gvg::scene_seed(cfg.seed, i), cfg.scene_generator());
    scene.id = i;
    const std::string name = scene_filename(i);
    gvg::write_text_file((fs::path(opts.out) / name).string(),
                         gvg::scene_to_json(scene).dump(2) + "\n");
    names.push_back(name);
  }
  const json manifest = {{"seed", cfg.seed},
                         {"count", count},
                         {"generator", gvg::generator_to_json(cfg.generator)},
                         {"scenes", names}};
  gvg::write_text_file((fs::path(opts.out) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << count << " scenes to " << opts.out << "\n";
  return 0;
}

std::vector<gvg::Scene> load_dataset(const std::string& dir) {
  const json manifest = gvg::load_json_file((fs::path(dir) / "manifest.json").string());
  std::vector<gvg::Scene> scenes;
  std::vector<std::string> errors;
  for (const json& name : manifest.at("scenes")) {
    const std::string path = (fs::path(dir) / name.get<std::string>()).string();
    try {
      scenes.push_back(gvg::scene_from_json(gvg::load_json_file(path)));
    } catch (const std::exception& e) {
      errors.push_back(path + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    for (const std::string& e : errors) std::cerr << "error: " << e << "\n";
    throw std::runtime_error(std::to_string(errors.size()) + " malformed scene file(s)");
  }
  return scenes;
}

struct SceneOutput {
  std::string prediction_line;
  json attn_dump;
  gvg::Grid global_logits;
  std::vector<gvg::Grid> instance_logits;
  gvg::BinaryMask merged;
};

int cmd_run(const GlobalOpts& opts, const std::string& dataset, const std::string& params_path) {
  const gvg::RunConfig cfg = load_config(opts);
  if (opts.out.empty()) throw std::runtime_error("run: --out is required");
  const std::vector<gvg::Scene> scenes = load_dataset(dataset);

  std::optional<gvg::Model> model;
  if (params_path.empty()) {
    model.emplace(cfg);
  } else {
    model.emplace(cfg, gvg::ParamStore::load_file(params_path));
  }

  std::vector<SceneOutput> outputs(scenes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenes.size()) return;
      const gvg::Scene& scene = scenes[i];
      const gvg::ForwardResult fwd = model->forward(scene);
      const gvg::FinalOutput out = model->postprocess_scene(fwd);
      SceneOutput& so = outputs[i];
      so.prediction_line =
          gvg::prediction_to_json(scene.id, out, fwd.selection.points,
                                  gvg::sigmoid(fwd.seg.existence_logit))
              .dump() +
          "\n";
      if (opts.dump_attn) {
        json weights = json::array();
        for (int q = 0; q < fwd.attn.n_queries; ++q) {
          weights.push_back(std::vector<double>(
              fwd.attn.weights.begin() + static_cast<std::size_t>(q) * fwd.attn.n_cells,
              fwd.attn.weights.begin() + static_cast<std::size_t>(q + 1) * fwd.attn.n_cells));
        }
        json pts = json::array();
        for (const gvg::Point& p : fwd.selection.points) pts.push_back({p.x, p.y});
        so.attn_dump = {{"id", scene.id},
                        {"score_map",
                         {{"h", fwd.attn.score_map.height},
                          {"w", fwd.attn.score_map.width},
                          {"values", fwd.attn.score_map.values}}},
                        {"points", pts},
                        {"cells", fwd.selection.cells},
                        {"weights", weights}};
      }
      if (opts.dump_masks) {
        so.global_logits = fwd.seg.mask_logits;
        so.instance_logits = fwd.masks.logits;
        so.merged = out.mask;
      }
    }
  };
  const int n_workers = std::max(1, opts.workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  fs::create_directories(opts.out);
  std::ofstream pred((fs::path(opts.out) / "predictions.jsonl").string(), std::ios::binary);
  if (!pred) throw std::runtime_error("cannot write predictions.jsonl");
  for (const SceneOutput& so : outputs) pred << so.prediction_line;
  pred.close();

  if (opts.dump_attn || opts.dump_masks) {
    const fs::path dump_dir = fs::path(opts.out) / "dump";
    fs::create_directories(dump_dir);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const SceneOutput& so = outputs[i];
      char tag[32];
      std::snprintf(tag, sizeof(tag), "scene_%05zu", i);
      if (opts.dump_attn) {
        gvg::write_text_file((dump_dir / (std::string(tag) + "_attn.json")).string(),
                             so.attn_dump.dump(2) + "\n");
      }
      if (opts.dump_masks) {
        gvg::write_pgm((dump_dir / (std::string(tag) + "_global.pgm")).string(),
                       so.global_logits);
        for (std::size_t q = 0; q < so.instance_logits.size(); ++q) {
          char qtag[16];
          std::snprintf(qtag, sizeof(qtag), "_q%02zu.pgm", q);
          gvg::write_pgm((dump_dir / (std::string(tag) + qtag)).string(), so.instance_logits[q]);
        }
        gvg::write_pgm((dump_dir / (std::string(tag) + "_merged.pgm")).string(), so.merged);
      }
    }
  }
  std::cout << "wrote " << outputs.size() << " prediction records to " << opts.out << "\n";
  return 0;
}

int cmd_eval(const GlobalOpts& opts, const std::string& pred_path, const std::string& dataset,
             const std::string& metric_set) {
  const std::vector<gvg::Scene> scenes = load_dataset(dataset);

  std::vector<gvg::PredictionRecord> preds;
  {
    std::ifstream f(pred_path);
    if (!f) throw std::runtime_error("cannot read " + pred_path);
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      preds.push_back(gvg::prediction_from_json(json::parse(line)));
    }
  }
  if (preds.size() != scenes.size()) {
    throw std::runtime_error("eval: prediction count " + std::to_string(preds.size()) +
                             " != scene count " + std::to_string(scenes.size()));
  }
  std::vector<std::string> mismatched;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (preds[i].id != scenes[i].id) {
      mismatched.push_back("index " + std::to_string(i) + ": prediction id " +
                           std::to_string(preds[i].id) + " vs scene id " +
                           std::to_string(scenes[i].id));
    }
  }
  if (!mismatched.empty()) {
    for (const std::string& m : mismatched) std::cerr << "error: " << m << "\n";
    throw std::runtime_error("eval: scene id mismatch");
  }

  std::vector<gvg::SceneRecord> records;
  std::vector<gvg::SceneGroundTruth> gts;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    gts.push_back(gvg::rasterize_ground_truth(scenes[i], preds[i].output.mask.height,
                                              preds[i].output.mask.width));
    records.push_back(gvg::make_scene_record(preds[i].output, gts.back()));
  }

  gvg::EvalSummary summary;
  const bool all = metric_set == "all";
  if (metric_set == "rec" || all) {
    const bool single = std::all_of(records.begin(), records.end(), [](const gvg::SceneRecord& r) {
      return r.gt_boxes.size() == 1;
    });
    if (single) {
      summary.precision_at_05 = gvg::precision_at_05(records);
    } else if (!all) {
      throw std::runtime_error("eval: metric set 'rec' needs single-target scenes");
    }
  }
  if (metric_set == "grec" || all) {
    const gvg::GrecResult r = gvg::grec_f1(records);
    summary.f1score = r.f1score;
    summary.n_acc = r.n_acc;
  }
  if (metric_set == "gres" || all) {
    const gvg::GresResult r = gvg::gres_iou(records);
    summary.g_iou = r.g_iou;
    summary.c_iou = r.c_iou;
  }
  if (metric_set == "zom" || all) {
    const gvg::ZomResult r = gvg::zom_metrics(records);
    summary.o_iou = r.o_iou;
    summary.m_iou = r.m_iou;
    summary.acc_zom = r.acc;
  }
  if (metric_set == "robust" || all) {
    const gvg::RobustResult r = gvg::robust_metrics(records);
    summary.m_iou = r.m_iou;
    summary.m_rr = r.m_rr;
    summary.r_iou = r.r_iou;
  }
  if (all) {
    std::vector<std::vector<gvg::Point>> points;
    std::vector<const gvg::SceneGroundTruth*> gt_ptrs;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      points.push_back(preds[i].points);
      gt_ptrs.push_back(&gts[i]);
    }
    summary.cover_acc = gvg::cover_acc(points, gt_ptrs);
  }

  const json sj = gvg::eval_summary_to_json(summary);
  for (auto it = sj.begin(); it != sj.end(); ++it) {
    std::cout << it.key() << ": " << json(it.value()).dump() << "\n";
  }
  if (!opts.out.empty()) {
    fs::create_directories(opts.out);
    gvg::write_text_file((fs::path(opts.out) / "metrics.json").string(), sj.dump(2) + "\n");
    gvg::write_text_file((fs::path(opts.out) / "metrics.csv").string(),
                         gvg::eval_summary_to_csv(summary));
    std::ostringstream per_scene;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const gvg::SceneRecord& r = records[i];
      per_scene << json{{"id", preds[i].id},
                        {"iou", r.gt_non_target ? (r.mask.empty_mask() ? 1.0 : 0.0)
                                                : gvg::mask_iou(r.mask, r.gt_mask)},
                        {"predicted_non_target", r.predicted_non_target},
                        {"gt_non_target", r.gt_non_target},
                        {"detections", r.boxes.size()},
                        {"gt_instances", r.gt_boxes.size()}}
                       .dump()
                << "\n";
    }
    gvg::write_text_file((fs::path(opts.out) / "per_scene.jsonl").string(), per_scene.str());
  }
  return 0;
}

int cmd_fit_demo(const GlobalOpts& opts, int steps, double lr) {
  const gvg::RunConfig cfg = load_config(opts);
  gvg::Model model(cfg);
  gvg::FitDemo fit(model, gvg::fit_demo_scenes(cfg));
  const std::vector<gvg::LossReport> history = fit.run(steps, lr);
  std::cout << "initial total " << history.front().total << ", final total "
            << history.back().total << "\n";
  if (!opts.out.empty()) {
    fs::create_directories(opts.out);
    gvg::write_text_file((fs::path(opts.out) / "fit_demo.csv").string(),
                         gvg::loss_history_to_csv(history));
    model.params().save_file((fs::path(opts.out) / "params.bin").string());
  }
  return 0;
}

int selftest_fail(const std::string& name, const std::string& detail) {
  std::cout << "[fail] " << name << ": " << detail << "\n";
  return 1;
}

int cmd_selftest() {
  std::mt19937_64 rng(20240915);
  auto uniform = [&](double lo, double hi) {
    return lo + (static_cast<double>(rng() >> 11) / 9007199254740992.0) * (hi - lo);
  };

  {  // softmax outputs stay on the probability simplex
    for (int trial = 0; trial < 1000; ++trial) {
      gvg::Vec v(1 + rng() % 16);
      for (double& x : v) x = uniform(-30.0, 30.0);
      const gvg::Vec p = gvg::softmax(v);
      double sum = 0.0;
      for (double x : p) {
        if (x < 0.0) return selftest_fail("softmax", "negative probability");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-9) return selftest_fail("softmax", "sum != 1");
    }
    std::cout << "[ok] softmax simplex (1000 draws)\n";
  }

  {  // bilinear interpolation against the four-neighbor oracle
    for (int trial = 0; trial < 1000; ++trial) {
      gvg::Grid g = gvg::Grid::zeros(1 + rng() % 6, 1 + rng() % 6, 1 + rng() % 4);
      for (double& v : g.values) v = uniform(-5.0, 5.0);
      const double x = uniform(-0.3, 1.3);
      const double y = uniform(-0.3, 1.3);
      const gvg::Vec a = gvg::bilinear_sample(g, x, y);
      const gvg::Vec b = gvg::testing::bilinear_oracle(g, x, y);
      for (std::size_t c = 0; c < a.size(); ++c) {
        if (std::abs(a[c] - b[c]) > 1e-12) return selftest_fail("bilinear", "oracle mismatch");
      }
    }
    std::cout << "[ok] bilinear vs four-neighbor oracle (1000 draws)\n";
  }

  {  // parameter store round-trip
    gvg::ParamStore store(77);
    store.matrix("a.w", 5, 3);
    store.vector("a.b", 5);
    std::ostringstream os;
    store.save(os);
    std::istringstream is(os.str());
    const gvg::ParamStore loaded = gvg::ParamStore::load(is);
    if (loaded.require("a.w").data != store.require("a.w").data ||
        loaded.require("a.b").data != store.require("a.b").data ||
        loaded.seed() != store.seed()) {
      return selftest_fail("paramstore", "round-trip not lossless");
    }
    std::cout << "[ok] paramstore round-trip\n";
  }

  {  // assignment vs exhaustive enumeration
    for (int trial = 0; trial < 200; ++trial) {
      gvg::CostMatrix cost;
      cost.n_queries = 1 + static_cast<int>(rng() % 5);
      cost.n_targets = 1 + static_cast<int>(rng() % 5);
      cost.data.resize(static_cast<std::size_t>(cost.n_queries) * cost.n_targets);
      for (double& v : cost.data) v = uniform(0.0, 10.0);
      const gvg::Assignment got = gvg::hungarian(cost);
      const auto want = gvg::testing::assignment_oracle(cost);
      double total = 0.0;
      for (int q = 0; q < cost.n_queries; ++q) {
        if (got.query_to_target[static_cast<std::size_t>(q)] >= 0) {
          total += cost.at(q, got.query_to_target[static_cast<std::size_t>(q)]);
        }
      }
      if (total != want.best_total) return selftest_fail("hungarian", "total != brute force");
    }
    std::cout << "[ok] hungarian vs brute force (200 draws)\n";
  }

  {  // deformable attention vs the literal triple loop
    gvg::ParamStore params(3);
    gvg::register_deform_attn_params(params, "t.deform", 8, 2, 2, 3);
    gvg::register_pyramid_params(params, 8, 2);
    for (int trial = 0; trial < 100; ++trial) {
      gvg::Grid base = gvg::Grid::zeros(6, 6, 8);
      for (double& v : base.values) v = uniform(-2.0, 2.0);
      const gvg::PyramidFeatures pyr = gvg::build_pyramid(base, params, 2);
      gvg::Vec q(8);
      for (double& v : q) v = uniform(-2.0, 2.0);
      const gvg::Point ref{uniform(0.0, 1.0), uniform(0.0, 1.0)};
      const gvg::Vec a = gvg::ms_deform_attn(q, ref, pyr, params, "t.deform", 2, 3);
      const gvg::Vec b = gvg::testing::deform_attn_oracle(q, ref, pyr, params, "t.deform", 2, 3);
      for (std::size_t c = 0; c < a.size(); ++c) {
        if (std::abs(a[c] - b[c]) > 1e-9) return selftest_fail("deform", "oracle mismatch");
      }
    }
    std::cout << "[ok] deformable attention vs triple-loop oracle (100 draws)\n";
  }

  {  // greedy point selection vs independent reimplementation
    for (int trial = 0; trial < 50; ++trial) {
      gvg::Grid map = gvg::Grid::zeros(5 + static_cast<int>(rng() % 8),
                                       5 + static_cast<int>(rng() % 8), 1);
      for (double& v : map.values) v = uniform(-3.0, 3.0);
      gvg::Grid img = gvg::Grid::zeros(map.height, map.width, 2);
      const int n_q = 1 + static_cast<int>(rng() % 8);
      const auto got = gvg::dynamic_point_select(map, n_q, 0.003, img);
      const auto want = gvg::testing::point_select_oracle(map, n_q, 0.003);
      if (got.cells != want) return selftest_fail("point-select", "oracle mismatch");
    }
    std::cout << "[ok] dynamic point selection vs exhaustive oracle (50 draws)\n";
  }

  {  // perfect predictions score perfectly
    gvg::SceneRecord r;
    r.boxes = {{0.5, 0.5, 0.2, 0.2}};
    r.scores = {1.0};
    r.mask = gvg::BinaryMask::zeros(8, 8);
    r.mask.at(3, 3) = 1;
    r.predicted_non_target = false;
    r.gt_boxes = r.boxes;
    r.gt_mask = r.mask;
    r.gt_non_target = false;
    const std::vector<gvg::SceneRecord> scenes{r};
    if (gvg::grec_f1(scenes).f1score != 1.0 || gvg::gres_iou(scenes).g_iou != 1.0 ||
        gvg::zom_metrics(scenes).acc != 1.0 || gvg::robust_metrics(scenes).r_iou != 1.0) {
      return selftest_fail("metrics", "perfect predictions not scored 1.0");
    }
    std::cout << "[ok] metric sanity on perfect predictions\n";
  }

  std::cout << "selftest passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic generalized visual grounding pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts opts;
  app.add_option("--config", opts.config_path, "JSON config file; flags override it");
  app.add_option("--seed", opts.seed, "override the config seed");
  app.add_option("--out", opts.out, "output directory");
  app.add_flag("--dump-attn", opts.dump_attn, "dump score maps, points, and attention weights");
  app.add_flag("--dump-masks", opts.dump_masks, "dump mask grids as PGM");
  app.add_option("--workers", opts.workers, "worker threads for scene processing");

  int synth_count = 0;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--count", synth_count, "number of scenes")->required();

  std::string run_dataset;
  std::string run_params;
  CLI::App* run = app.add_subcommand("run", "run the pipeline over a dataset");
  run->add_option("--dataset", run_dataset, "dataset directory")->required();
  run->add_option("--params", run_params, "load parameters from file instead of seed init");

  std::string eval_pred;
  std::string eval_dataset;
  std::string eval_metrics = "all";
  CLI::App* eval = app.add_subcommand("eval", "evaluate predictions against ground truth");
  eval->add_option("--pred", eval_pred, "predictions.jsonl path")->required();
  eval->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval->add_option("--metrics", eval_metrics, "rec | grec | gres | zom | robust | all");

  int fit_steps = 50;
  double fit_lr = gvg::kFitDemoDefaultLr;
  CLI::App* fit = app.add_subcommand("fit-demo", "finite-difference descent demo");
  fit->add_option("--steps", fit_steps, "descent steps");
  fit->add_option("--lr", fit_lr, "learning rate");

  app.add_subcommand("selftest", "run the embedded oracle suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(opts, synth_count);
    if (run->parsed()) return cmd_run(opts, run_dataset, run_params);
    if (eval->parsed()) return cmd_eval(opts, eval_pred, eval_dataset, eval_metrics);
    if (fit->parsed()) return cmd_fit_demo(opts, fit_steps, fit_lr);
    return cmd_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
