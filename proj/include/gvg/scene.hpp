#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gvg/box.hpp"
#include "gvg/mask.hpp"
#include "gvg/params.hpp"

namespace gvg {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Attribute vocabulary: tokens 0..3 are colors, 4..7 are textures.
// Every instance carries exactly one of each.
inline constexpr int kNumColors = 4;
inline constexpr int kNumTextures = 4;
inline constexpr int kVocabSize = kNumColors + kNumTextures;

enum class ShapeKind : int { Rectangle = 0, Ellipse = 1 };

struct SceneInstance {
  ShapeKind kind = ShapeKind::Rectangle;
  BoxCxCyWh box;                 // normalized, contained in [0,1]^2
  std::vector<int> attributes;   // {color id, texture id}

  bool has_attribute(int token) const {
    return std::find(attributes.begin(), attributes.end(), token) != attributes.end();
  }
};

struct Scene {
  std::int64_t id = 0;
  int grid_h = 0;                // feature grid resolution
  int grid_w = 0;
  std::vector<SceneInstance> instances;
  std::vector<int> expression;   // bag of attribute tokens
  bool non_target = false;       // true iff the expression matches no instance
};

/// An instance matches iff it carries every expressed attribute.
inline bool instance_matches(const SceneInstance& inst, const std::vector<int>& expression) {
  return std::all_of(expression.begin(), expression.end(),
                     [&](int tok) { return inst.has_attribute(tok); });
}

inline std::vector<int> matching_instances(const Scene& scene) {
  std::vector<int> out;
  for (std::size_t i = 0; i < scene.instances.size(); ++i) {
    if (instance_matches(scene.instances[i], scene.expression)) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

struct GeneratorConfig {
  int grid_h = 8;
  int grid_w = 8;
  int min_instances = 1;
  int max_instances = 3;
  double min_extent = 0.18;
  double max_extent = 0.42;
  double non_target_rate = 0.2;
  int max_retries = 256;
};

struct InstanceTruth {
  BoxCxCyWh box;
  BinaryMask mask;
};

struct SceneGroundTruth {
  std::vector<InstanceTruth> instances;
  BinaryMask global_mask;
};

namespace detail {

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  const double u = u01(rng);
  return std::min(hi, lo + static_cast<int>(u * (hi - lo + 1)));
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo + u01(rng) * (hi - lo);
}

}  // namespace detail

/// Cell-center coverage test at resolution h x w.
inline BinaryMask rasterize_instance(const SceneInstance& inst, int h, int w) {
  BinaryMask m = BinaryMask::zeros(h, w);
  const double hw = 0.5 * inst.box.w;
  const double hh = 0.5 * inst.box.h;
  for (int y = 0; y < h; ++y) {
    const double py = (y + 0.5) / h;
    for (int x = 0; x < w; ++x) {
      const double px = (x + 0.5) / w;
      bool inside = false;
      if (inst.kind == ShapeKind::Rectangle) {
        inside = std::abs(px - inst.box.cx) <= hw && std::abs(py - inst.box.cy) <= hh;
      } else {
        const double dx = (px - inst.box.cx) / hw;
        const double dy = (py - inst.box.cy) / hh;
        inside = dx * dx + dy * dy <= 1.0;
      }
      if (inside) m.at(y, x) = 1;
    }
  }
  return m;
}

/// Masks and tight boxes for the instances the expression refers to.
inline SceneGroundTruth rasterize_ground_truth(const Scene& scene, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("rasterize_ground_truth: bad size");
  SceneGroundTruth gt;
  gt.global_mask = BinaryMask::zeros(out_h, out_w);
  for (int idx : matching_instances(scene)) {
    const SceneInstance& inst = scene.instances[static_cast<std::size_t>(idx)];
    InstanceTruth truth;
    truth.box = inst.box;
    truth.mask = rasterize_instance(inst, out_h, out_w);
    gt.global_mask = mask_or(gt.global_mask, truth.mask);
    gt.instances.push_back(std::move(truth));
  }
  return gt;
}

/// Per-scene seed stream for dataset synthesis.
inline std::uint64_t scene_seed(std::uint64_t base_seed, std::int64_t index) {
  return detail::splitmix64(base_seed ^ (0x53594e544800ull + static_cast<std::uint64_t>(index)));
}

/// Deterministic synthetic scene: disjoint rectangle/ellipse instances plus
/// a bag-of-attributes expression that matches at least one instance, or --
/// at the configured rate -- none of them.
inline Scene generate_scene(std::uint64_t seed, const GeneratorConfig& cfg) {
  if (cfg.grid_h < 1 || cfg.grid_w < 1 || cfg.min_instances < 0 ||
      cfg.max_instances < cfg.min_instances || cfg.min_extent <= 0.0 ||
      cfg.max_extent >= 1.0 || cfg.min_extent > cfg.max_extent ||
      cfg.non_target_rate < 0.0 || cfg.non_target_rate > 1.0) {
    throw std::invalid_argument("generate_scene: invalid generator config");
  }

  std::mt19937_64 rng(detail::splitmix64(seed));
  Scene scene;
  scene.grid_h = cfg.grid_h;
  scene.grid_w = cfg.grid_w;

  const int count = detail::uniform_int(rng, cfg.min_instances, cfg.max_instances);
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      SceneInstance inst;
      inst.kind = detail::uniform_int(rng, 0, 1) == 0 ? ShapeKind::Rectangle : ShapeKind::Ellipse;
      inst.box.w = detail::uniform_real(rng, cfg.min_extent, cfg.max_extent);
      inst.box.h = detail::uniform_real(rng, cfg.min_extent, cfg.max_extent);
      inst.box.cx = detail::uniform_real(rng, 0.5 * inst.box.w, 1.0 - 0.5 * inst.box.w);
      inst.box.cy = detail::uniform_real(rng, 0.5 * inst.box.h, 1.0 - 0.5 * inst.box.h);
      inst.attributes = {detail::uniform_int(rng, 0, kNumColors - 1),
                         kNumColors + detail::uniform_int(rng, 0, kNumTextures - 1)};
      const bool overlaps = std::any_of(
          scene.instances.begin(), scene.instances.end(),
          [&](const SceneInstance& other) { return box_intersection(inst.box, other.box) > 0.0; });
      if (!overlaps) {
        scene.instances.push_back(std::move(inst));
        placed = true;
      }
    }
    if (!placed) {
      throw GenerationError("generate_scene: could not place " + std::to_string(count) +
                            " disjoint instances");
    }
  }

  const bool want_non_target = detail::u01(rng) < cfg.non_target_rate;
  if (want_non_target || scene.instances.empty()) {
    // Every single- and two-token expression, shuffled, first non-matching wins.
    std::vector<std::vector<int>> candidates;
    for (int c = 0; c < kNumColors; ++c) candidates.push_back({c});
    for (int t = 0; t < kNumTextures; ++t) candidates.push_back({kNumColors + t});
    for (int c = 0; c < kNumColors; ++c) {
      for (int t = 0; t < kNumTextures; ++t) candidates.push_back({c, kNumColors + t});
    }
    for (std::size_t i = candidates.size(); i > 1; --i) {
      std::swap(candidates[i - 1],
                candidates[static_cast<std::size_t>(detail::uniform_int(rng, 0, static_cast<int>(i) - 1))]);
    }
    bool found = false;
    for (const auto& cand : candidates) {
      const bool any_match = std::any_of(scene.instances.begin(), scene.instances.end(),
                                         [&](const SceneInstance& inst) {
                                           return instance_matches(inst, cand);
                                         });
      if (!any_match) {
        scene.expression = cand;
        found = true;
        break;
      }
    }
    if (!found) {
      throw GenerationError("generate_scene: no non-matching expression exists");
    }
  } else {
    const SceneInstance& target =
        scene.instances[static_cast<std::size_t>(detail::uniform_int(
            rng, 0, static_cast<int>(scene.instances.size()) - 1))];
    switch (detail::uniform_int(rng, 0, 2)) {
      case 0: scene.expression = {target.attributes[0]}; break;
      case 1: scene.expression = {target.attributes[1]}; break;
      default: scene.expression = target.attributes; break;
    }
  }

  scene.non_target = matching_instances(scene).empty();
  return scene;
}

}  // namespace gvg
