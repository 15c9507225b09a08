#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "gvg/losses.hpp"
#include "gvg/matcher.hpp"
#include "gvg/postprocess.hpp"
#include "gvg/scene.hpp"

namespace gvg {

/// Whole-run configuration. Image features live at image_size/16, masks at
/// image_size/4.
struct RunConfig {
  int n_q = 10;
  double w_dist = 0.003;
  int heads = 4;
  int levels = 3;
  int points_per_level = 4;
  int depth = 3;
  int channels = 16;
  int text_len = 8;
  int image_size = 128;
  std::uint64_t seed = 0;
  CostWeights match;
  LossWeights loss;
  double thr_q = 0.9;
  double thr_m = 0.5;
  bool nms = false;
  double nms_iou = 0.7;
  GeneratorConfig generator;

  int feature_size() const { return image_size / 16; }
  int mask_size() const { return image_size / 4; }

  GeneratorConfig scene_generator() const {
    GeneratorConfig g = generator;
    g.grid_h = feature_size();
    g.grid_w = feature_size();
    return g;
  }

  PostprocessConfig postprocess_config() const { return {thr_q, thr_m, nms, nms_iou}; }

  void validate() const {
    if (image_size < 16 || image_size % 16 != 0) {
      throw std::invalid_argument("config: image_size must be a positive multiple of 16");
    }
    if (n_q < 1) throw std::invalid_argument("config: n_q must be >= 1");
    if (n_q > feature_size() * feature_size()) {
      throw std::invalid_argument("config: n_q exceeds feature grid cells");
    }
    if (w_dist < 0.0) throw std::invalid_argument("config: w_dist must be >= 0");
    if (heads < 1 || channels % heads != 0) {
      throw std::invalid_argument("config: heads must divide channels");
    }
    if (levels < 1 || feature_size() < (1 << (levels - 1))) {
      throw std::invalid_argument("config: feature grid too small for pyramid levels");
    }
    if (points_per_level < 1) throw std::invalid_argument("config: points_per_level must be >= 1");
    if (depth < 1) throw std::invalid_argument("config: depth must be >= 1");
    if (text_len < 1) throw std::invalid_argument("config: text_len must be >= 1");
    if (thr_q < 0.0 || thr_q > 1.0) throw std::invalid_argument("config: thr_q out of [0,1]");
    if (thr_m < 0.0 || thr_m > 1.0) throw std::invalid_argument("config: thr_m out of [0,1]");
    if (nms && (nms_iou <= 0.0 || nms_iou > 1.0)) {
      throw std::invalid_argument("config: nms_iou out of (0,1]");
    }
  }
};

}  // namespace gvg
