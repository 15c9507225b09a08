#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gvg/config.hpp"
#include "gvg/metrics.hpp"
#include "gvg/pipeline.hpp"
#include "gvg/postprocess.hpp"
#include "gvg/query_gen.hpp"
#include "gvg/scene.hpp"

namespace gvg {

using json = nlohmann::json;

inline json scene_to_json(const Scene& scene) {
  json instances = json::array();
  for (const SceneInstance& inst : scene.instances) {
    instances.push_back({
        {"kind", inst.kind == ShapeKind::Rectangle ? "rectangle" : "ellipse"},
        {"center", {inst.box.cx, inst.box.cy}},
        {"extent", {inst.box.w, inst.box.h}},
        {"attributes", inst.attributes},
    });
  }
  return json{{"id", scene.id},
              {"grid", {{"h", scene.grid_h}, {"w", scene.grid_w}}},
              {"instances", instances},
              {"expression", scene.expression},
              {"non_target", scene.non_target}};
}

inline Scene scene_from_json(const json& j) {
  Scene scene;
  scene.id = j.at("id").get<std::int64_t>();
  scene.grid_h = j.at("grid").at("h").get<int>();
  scene.grid_w = j.at("grid").at("w").get<int>();
  for (const json& ij : j.at("instances")) {
    SceneInstance inst;
    const std::string kind = ij.at("kind").get<std::string>();
    if (kind == "rectangle") {
      inst.kind = ShapeKind::Rectangle;
    } else if (kind == "ellipse") {
      inst.kind = ShapeKind::Ellipse;
    } else {
      throw std::invalid_argument("scene: unknown shape kind '" + kind + "'");
    }
    inst.box.cx = ij.at("center").at(0).get<double>();
    inst.box.cy = ij.at("center").at(1).get<double>();
    inst.box.w = ij.at("extent").at(0).get<double>();
    inst.box.h = ij.at("extent").at(1).get<double>();
    inst.attributes = ij.at("attributes").get<std::vector<int>>();
    scene.instances.push_back(std::move(inst));
  }
  scene.expression = j.at("expression").get<std::vector<int>>();
  scene.non_target = j.at("non_target").get<bool>();
  return scene;
}

inline json generator_to_json(const GeneratorConfig& g) {
  return json{{"min_instances", g.min_instances},   {"max_instances", g.max_instances},
              {"min_extent", g.min_extent},         {"max_extent", g.max_extent},
              {"non_target_rate", g.non_target_rate}, {"max_retries", g.max_retries}};
}

inline void generator_from_json(const json& j, GeneratorConfig& g) {
  g.min_instances = j.value("min_instances", g.min_instances);
  g.max_instances = j.value("max_instances", g.max_instances);
  g.min_extent = j.value("min_extent", g.min_extent);
  g.max_extent = j.value("max_extent", g.max_extent);
  g.non_target_rate = j.value("non_target_rate", g.non_target_rate);
  g.max_retries = j.value("max_retries", g.max_retries);
}

inline json config_to_json(const RunConfig& c) {
  return json{{"n_q", c.n_q},
              {"w_dist", c.w_dist},
              {"heads", c.heads},
              {"levels", c.levels},
              {"points_per_level", c.points_per_level},
              {"depth", c.depth},
              {"channels", c.channels},
              {"text_len", c.text_len},
              {"image_size", c.image_size},
              {"seed", c.seed},
              {"match",
               {{"cls", c.match.cls},
                {"box", c.match.box},
                {"giou", c.match.giou},
                {"point", c.match.point}}},
              {"loss",
               {{"detr", c.loss.detr},
                {"seg", c.loss.seg},
                {"instance", c.loss.instance},
                {"exist", c.loss.exist},
                {"neg", c.loss.neg}}},
              {"thr_q", c.thr_q},
              {"thr_m", c.thr_m},
              {"nms", c.nms},
              {"nms_iou", c.nms_iou},
              {"generator", generator_to_json(c.generator)}};
}

/// Missing fields keep their defaults, so a partial config file is valid.
inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.n_q = j.value("n_q", c.n_q);
  c.w_dist = j.value("w_dist", c.w_dist);
  c.heads = j.value("heads", c.heads);
  c.levels = j.value("levels", c.levels);
  c.points_per_level = j.value("points_per_level", c.points_per_level);
  c.depth = j.value("depth", c.depth);
  c.channels = j.value("channels", c.channels);
  c.text_len = j.value("text_len", c.text_len);
  c.image_size = j.value("image_size", c.image_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("match")) {
    const json& m = j.at("match");
    c.match.cls = m.value("cls", c.match.cls);
    c.match.box = m.value("box", c.match.box);
    c.match.giou = m.value("giou", c.match.giou);
    c.match.point = m.value("point", c.match.point);
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    c.loss.detr = l.value("detr", c.loss.detr);
    c.loss.seg = l.value("seg", c.loss.seg);
    c.loss.instance = l.value("instance", c.loss.instance);
    c.loss.exist = l.value("exist", c.loss.exist);
    c.loss.neg = l.value("neg", c.loss.neg);
  }
  c.thr_q = j.value("thr_q", c.thr_q);
  c.thr_m = j.value("thr_m", c.thr_m);
  c.nms = j.value("nms", c.nms);
  c.nms_iou = j.value("nms_iou", c.nms_iou);
  if (j.contains("generator")) generator_from_json(j.at("generator"), c.generator);
  return c;
}

/// One prediction record per scene: kept detections, the merged mask as
/// run-length counts (leading-zero convention), the prior points, and the
/// non-target verdict.
inline json prediction_to_json(std::int64_t id, const FinalOutput& out,
                               const std::vector<Point>& points, double existence_prob) {
  json detections = json::array();
  for (const Detection& d : out.detections) {
    detections.push_back({{"query", d.query},
                          {"box", {d.box.cx, d.box.cy, d.box.w, d.box.h}},
                          {"score", d.score}});
  }
  json pts = json::array();
  for (const Point& p : points) pts.push_back({p.x, p.y});
  return json{{"id", id},
              {"non_target", out.non_target},
              {"existence", existence_prob},
              {"detections", detections},
              {"mask", {{"h", out.mask.height}, {"w", out.mask.width}, {"rle", rle_encode(out.mask)}}},
              {"points", pts}};
}

struct PredictionRecord {
  std::int64_t id = 0;
  FinalOutput output;
  std::vector<Point> points;
  double existence = 0.0;
};

inline PredictionRecord prediction_from_json(const json& j) {
  PredictionRecord rec;
  rec.id = j.at("id").get<std::int64_t>();
  rec.output.non_target = j.at("non_target").get<bool>();
  rec.existence = j.at("existence").get<double>();
  for (const json& dj : j.at("detections")) {
    Detection d;
    d.query = dj.at("query").get<int>();
    d.box.cx = dj.at("box").at(0).get<double>();
    d.box.cy = dj.at("box").at(1).get<double>();
    d.box.w = dj.at("box").at(2).get<double>();
    d.box.h = dj.at("box").at(3).get<double>();
    d.score = dj.at("score").get<double>();
    rec.output.detections.push_back(d);
    rec.output.kept.push_back(d.query);
  }
  const json& mj = j.at("mask");
  rec.output.mask = rle_decode(mj.at("rle").get<std::vector<int>>(), mj.at("h").get<int>(),
                               mj.at("w").get<int>());
  for (const json& pj : j.at("points")) {
    rec.points.push_back({pj.at(0).get<double>(), pj.at(1).get<double>()});
  }
  return rec;
}

inline json eval_summary_to_json(const EvalSummary& s) {
  json j = json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("precision_at_05", s.precision_at_05);
  put("f1score", s.f1score);
  put("n_acc", s.n_acc);
  put("g_iou", s.g_iou);
  put("c_iou", s.c_iou);
  put("m_iou", s.m_iou);
  put("o_iou", s.o_iou);
  put("acc_zom", s.acc_zom);
  put("m_rr", s.m_rr);
  put("r_iou", s.r_iou);
  put("cover_acc", s.cover_acc);
  return j;
}

/// Header line plus one value row, restricted to the metrics present.
inline std::string eval_summary_to_csv(const EvalSummary& s) {
  const json j = eval_summary_to_json(s);
  std::ostringstream header;
  std::ostringstream row;
  bool first = true;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!first) {
      header << ",";
      row << ",";
    }
    header << it.key();
    row << json(it.value()).dump();
    first = false;
  }
  return header.str() + "\n" + row.str() + "\n";
}

/// 8-bit binary PGM of sigmoid(logits); used for mask inspection dumps.
inline void write_pgm(const std::string& path, const Grid& logits) {
  if (logits.channels != 1) throw std::invalid_argument("write_pgm: need 1-channel grid");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << logits.width << " " << logits.height << "\n255\n";
  for (double v : logits.values) {
    const int byte = static_cast<int>(std::lround(sigmoid(v) * 255.0));
    f.put(static_cast<char>(std::clamp(byte, 0, 255)));
  }
}

inline void write_pgm(const std::string& path, const BinaryMask& mask) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  for (std::uint8_t v : mask.data) f.put(static_cast<char>(v ? 255 : 0));
}

inline std::string loss_history_to_csv(const std::vector<LossReport>& history) {
  std::ostringstream os;
  os << "step,detr,seg,instance,exist,total\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const LossReport& r = history[i];
    os << i << "," << json(r.detr).dump() << "," << json(r.seg).dump() << ","
       << json(r.instance_seg).dump() << "," << json(r.exist).dump() << ","
       << json(r.total).dump() << "\n";
  }
  return os.str();
}

inline json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  json j;
  f >> j;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

}  // namespace gvg
