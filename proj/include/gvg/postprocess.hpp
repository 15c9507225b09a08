#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "gvg/box.hpp"
#include "gvg/grid.hpp"
#include "gvg/mask.hpp"
#include "gvg/numerics.hpp"

namespace gvg {

/// fused_i = existence_prob * query_prob_i.
inline Vec fuse_scores(const Vec& query_probs, double existence_prob) {
  Vec out(query_probs.size());
  for (std::size_t i = 0; i < query_probs.size(); ++i) out[i] = existence_prob * query_probs[i];
  return out;
}

/// Ascending indices with fused score strictly above thr_q; an empty result
/// means the scene is predicted non-target.
inline std::vector<int> select_queries(const Vec& fused_scores, double thr_q) {
  if (thr_q < 0.0 || thr_q > 1.0) throw std::invalid_argument("select_queries: thr_q out of range");
  std::vector<int> out;
  for (std::size_t i = 0; i < fused_scores.size(); ++i) {
    if (fused_scores[i] > thr_q) out.push_back(static_cast<int>(i));
  }
  return out;
}

inline BinaryMask binarize(const Grid& logits, double thr_prob) {
  BinaryMask m = BinaryMask::zeros(logits.height, logits.width);
  for (std::size_t i = 0; i < logits.values.size(); ++i) {
    m.data[i] = sigmoid(logits.values[i]) > thr_prob ? 1 : 0;
  }
  return m;
}

/// Binarizes the global map and each kept instance map at thr_m, then ORs
/// them together.
inline BinaryMask merge_masks(const Grid& global_logits, const std::vector<Grid>& instance_logits,
                              const std::vector<int>& kept, double thr_m) {
  BinaryMask merged = binarize(global_logits, thr_m);
  for (int idx : kept) {
    const Grid& inst = instance_logits[static_cast<std::size_t>(idx)];
    if (inst.height != global_logits.height || inst.width != global_logits.width) {
      throw std::invalid_argument("merge_masks: instance/global shape mismatch");
    }
    merged = mask_or(merged, binarize(inst, thr_m));
  }
  return merged;
}

/// Greedy descending-score suppression; keeps boxes whose IoU with every
/// previously kept box is <= the threshold. Returns kept positions into the
/// input list, in descending score order.
inline std::vector<int> nms(const std::vector<BoxCxCyWh>& boxes, const Vec& scores,
                            double iou_threshold) {
  if (iou_threshold <= 0.0 || iou_threshold > 1.0) {
    throw std::invalid_argument("nms: threshold out of (0,1]");
  }
  std::vector<int> order = top_k(scores, static_cast<int>(scores.size()));
  std::vector<int> kept;
  for (int i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](int j) {
      return box_iou(boxes[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(j)]) >
             iou_threshold;
    });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

struct Detection {
  int query = -1;
  BoxCxCyWh box;
  double score = 0.0;
};

struct FinalOutput {
  std::vector<int> kept;          // ascending query indices
  std::vector<Detection> detections;
  BinaryMask mask;
  bool non_target = true;
};

struct PostprocessConfig {
  double thr_q = 0.9;
  double thr_m = 0.5;
  bool use_nms = false;
  double nms_iou = 0.7;
};

/// Full inference pipeline: fuse the existence score into query scores,
/// threshold, optionally suppress duplicates, and merge kept instance masks
/// with the global mask.
inline FinalOutput postprocess(const Vec& query_fg_probs, double existence_prob,
                               const std::vector<BoxCxCyWh>& boxes,
                               const Grid& global_logits,
                               const std::vector<Grid>& instance_logits,
                               const PostprocessConfig& cfg) {
  const Vec fused = fuse_scores(query_fg_probs, existence_prob);
  std::vector<int> kept = select_queries(fused, cfg.thr_q);
  if (cfg.use_nms && kept.size() > 1) {
    std::vector<BoxCxCyWh> kept_boxes;
    Vec kept_scores;
    for (int idx : kept) {
      kept_boxes.push_back(boxes[static_cast<std::size_t>(idx)]);
      kept_scores.push_back(fused[static_cast<std::size_t>(idx)]);
    }
    std::vector<int> surviving;
    for (int pos : nms(kept_boxes, kept_scores, cfg.nms_iou)) {
      surviving.push_back(kept[static_cast<std::size_t>(pos)]);
    }
    std::sort(surviving.begin(), surviving.end());
    kept = std::move(surviving);
  }

  FinalOutput out;
  out.kept = kept;
  for (int idx : kept) {
    out.detections.push_back(
        {idx, boxes[static_cast<std::size_t>(idx)], fused[static_cast<std::size_t>(idx)]});
  }
  out.mask = merge_masks(global_logits, instance_logits, kept, cfg.thr_m);
  out.non_target = kept.empty();
  return out;
}

}  // namespace gvg
