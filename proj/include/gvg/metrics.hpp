#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gvg/box.hpp"
#include "gvg/mask.hpp"
#include "gvg/numerics.hpp"

namespace gvg {

/// Per-scene prediction/ground-truth pair as consumed by the evaluators.
struct SceneRecord {
  std::vector<BoxCxCyWh> boxes;  // kept predictions
  Vec scores;                    // fused scores, aligned with boxes
  BinaryMask mask;               // merged predicted mask
  bool predicted_non_target = true;
  std::vector<BoxCxCyWh> gt_boxes;
  BinaryMask gt_mask;
  bool gt_non_target = true;
};

/// Both-empty masks count as a perfect match.
inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument("mask_iou: shape mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0;
    const bool pb = b.data[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Fraction of single-target scenes whose top-scoring box has IoU strictly
/// above 0.5 with the ground truth.
inline double precision_at_05(const std::vector<SceneRecord>& scenes) {
  int hits = 0;
  for (const SceneRecord& s : scenes) {
    if (s.gt_boxes.size() != 1) {
      throw std::invalid_argument("precision_at_05: scene is not single-target");
    }
    if (s.boxes.empty()) continue;
    const std::vector<int> order = top_k(s.scores, 1);
    if (box_iou(s.boxes[static_cast<std::size_t>(order[0])], s.gt_boxes[0]) > 0.5) ++hits;
  }
  return scenes.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(scenes.size());
}

namespace detail {

/// Greedy descending-score matching at IoU >= 0.5, each target used once.
/// Returns the number of matched predictions.
inline int greedy_match_count(const SceneRecord& s) {
  std::vector<char> used(s.gt_boxes.size(), 0);
  int tp = 0;
  for (int i : top_k(s.scores, static_cast<int>(s.scores.size()))) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < s.gt_boxes.size(); ++j) {
      if (used[j]) continue;
      const double iou = box_iou(s.boxes[static_cast<std::size_t>(i)], s.gt_boxes[j]);
      if (iou >= 0.5 && iou > best_iou) {
        best = static_cast<int>(j);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = 1;
      ++tp;
    }
  }
  return tp;
}

}  // namespace detail

struct GrecResult {
  double f1score = 0.0;  // fraction of scenes with per-scene F1 == 1
  double n_acc = 0.0;    // correctly predicted empty on non-target scenes
};

inline GrecResult grec_f1(const std::vector<SceneRecord>& scenes) {
  int success = 0;
  int nt_total = 0;
  int nt_correct = 0;
  for (const SceneRecord& s : scenes) {
    if (s.gt_boxes.empty()) {
      ++nt_total;
      const bool ok = s.boxes.empty();
      nt_correct += ok ? 1 : 0;
      success += ok ? 1 : 0;
      continue;
    }
    const int tp = detail::greedy_match_count(s);
    if (tp == static_cast<int>(s.boxes.size()) && tp == static_cast<int>(s.gt_boxes.size())) {
      ++success;
    }
  }
  GrecResult r;
  r.f1score = scenes.empty() ? 0.0 : static_cast<double>(success) / static_cast<double>(scenes.size());
  r.n_acc = nt_total == 0 ? 1.0 : static_cast<double>(nt_correct) / static_cast<double>(nt_total);
  return r;
}

struct GresResult {
  double g_iou = 0.0;  // mean per-scene IoU; correct empty counts 1
  double c_iou = 0.0;  // dataset-cumulative intersection / union
};

inline GresResult gres_iou(const std::vector<SceneRecord>& scenes) {
  double per_scene_sum = 0.0;
  double inter_total = 0.0;
  double union_total = 0.0;
  for (const SceneRecord& s : scenes) {
    if (s.gt_non_target) {
      per_scene_sum += s.mask.empty_mask() ? 1.0 : 0.0;
      union_total += static_cast<double>(s.mask.popcount());  // false positives only
      continue;
    }
    per_scene_sum += mask_iou(s.mask, s.gt_mask);
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < s.mask.data.size(); ++i) {
      const bool p = s.mask.data[i] != 0;
      const bool g = s.gt_mask.data[i] != 0;
      inter += (p && g) ? 1 : 0;
      uni += (p || g) ? 1 : 0;
    }
    inter_total += static_cast<double>(inter);
    union_total += static_cast<double>(uni);
  }
  GresResult r;
  r.g_iou = scenes.empty() ? 0.0 : per_scene_sum / static_cast<double>(scenes.size());
  r.c_iou = union_total == 0.0 ? 1.0 : inter_total / union_total;
  return r;
}

struct ZomResult {
  double o_iou = 0.0;  // cumulative IoU
  double m_iou = 0.0;  // mean IoU over scenes with targets
  double acc = 0.0;    // non-target classification accuracy over all scenes
};

inline ZomResult zom_metrics(const std::vector<SceneRecord>& scenes) {
  double iou_sum = 0.0;
  int with_targets = 0;
  double inter_total = 0.0;
  double union_total = 0.0;
  int correct_flags = 0;
  for (const SceneRecord& s : scenes) {
    if (s.predicted_non_target == s.gt_non_target) ++correct_flags;
    if (s.gt_non_target) {
      union_total += static_cast<double>(s.mask.popcount());
      continue;
    }
    ++with_targets;
    iou_sum += mask_iou(s.mask, s.gt_mask);
    for (std::size_t i = 0; i < s.mask.data.size(); ++i) {
      const bool p = s.mask.data[i] != 0;
      const bool g = s.gt_mask.data[i] != 0;
      inter_total += (p && g) ? 1.0 : 0.0;
      union_total += (p || g) ? 1.0 : 0.0;
    }
  }
  ZomResult r;
  r.o_iou = union_total == 0.0 ? 1.0 : inter_total / union_total;
  r.m_iou = with_targets == 0 ? 0.0 : iou_sum / static_cast<double>(with_targets);
  r.acc = scenes.empty() ? 0.0 : static_cast<double>(correct_flags) / static_cast<double>(scenes.size());
  return r;
}

struct RobustResult {
  double m_iou = 0.0;  // mean IoU over positive-expression scenes
  double m_rr = 0.0;   // empty-prediction rate on negative-expression scenes
  double r_iou = 0.0;  // mean over all scenes; negatives score 1 iff empty
};

/// Negative expressions are the non-target scenes; a negative scene counts
/// as recognized when the predicted mask is empty.
inline RobustResult robust_metrics(const std::vector<SceneRecord>& scenes) {
  double pos_sum = 0.0;
  int pos_count = 0;
  double neg_hits = 0.0;
  int neg_count = 0;
  double all_sum = 0.0;
  for (const SceneRecord& s : scenes) {
    if (s.gt_non_target) {
      ++neg_count;
      const double score = s.mask.empty_mask() ? 1.0 : 0.0;
      neg_hits += score;
      all_sum += score;
    } else {
      ++pos_count;
      const double iou = mask_iou(s.mask, s.gt_mask);
      pos_sum += iou;
      all_sum += iou;
    }
  }
  RobustResult r;
  r.m_iou = pos_count == 0 ? 0.0 : pos_sum / static_cast<double>(pos_count);
  r.m_rr = neg_count == 0 ? 1.0 : neg_hits / static_cast<double>(neg_count);
  r.r_iou = scenes.empty() ? 0.0 : all_sum / static_cast<double>(scenes.size());
  return r;
}

/// Aggregate view; fields are present when the requested metric set defines
/// them for the dataset at hand.
struct EvalSummary {
  std::optional<double> precision_at_05;
  std::optional<double> f1score;
  std::optional<double> n_acc;
  std::optional<double> g_iou;
  std::optional<double> c_iou;
  std::optional<double> m_iou;
  std::optional<double> o_iou;
  std::optional<double> acc_zom;
  std::optional<double> m_rr;
  std::optional<double> r_iou;
  std::optional<double> cover_acc;
};

}  // namespace gvg
