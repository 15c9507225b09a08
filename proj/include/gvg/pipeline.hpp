#pragma once

#include <utility>

#include "gvg/config.hpp"
#include "gvg/deform_decoder.hpp"
#include "gvg/encode.hpp"
#include "gvg/losses.hpp"
#include "gvg/matcher.hpp"
#include "gvg/metrics.hpp"
#include "gvg/postprocess.hpp"
#include "gvg/pyramid.hpp"
#include "gvg/query_gen.hpp"
#include "gvg/scene.hpp"
#include "gvg/seg_head.hpp"

namespace gvg {

struct ForwardResult {
  Grid image_features;
  TextSequence text;
  AttnOutputs attn;
  PointSelection selection;
  InstanceQuerySet queries;
  PyramidFeatures pyramid;
  DecodedQuerySet decoded;
  GlobalSeg seg;
  InstanceMasks masks;
};

/// Parameter registration plus the full forward pass in one place.
/// Everything downstream of construction is a pure function of
/// (config, params, scene).
class Model {
 public:
  explicit Model(const RunConfig& cfg) : cfg_(cfg), params_(cfg.seed) {
    cfg_.validate();
    register_params(params_, cfg_);
  }

  Model(const RunConfig& cfg, ParamStore params) : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    register_params(params_, cfg_);  // validates shapes of loaded tensors
  }

  static void register_params(ParamStore& params, const RunConfig& cfg) {
    register_encoder_params(params, cfg.channels);
    register_query_mlp(params, cfg.channels);
    register_pyramid_params(params, cfg.channels, cfg.levels);
    register_decoder_params(params, cfg.channels, cfg.heads, cfg.levels, cfg.points_per_level,
                            cfg.depth);
    register_seg_params(params, cfg.channels);
  }

  const RunConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  ForwardResult forward(const Scene& scene) const {
    ForwardResult r;
    auto encoded = encode(scene, params_, cfg_.channels, cfg_.text_len);
    r.image_features = std::move(encoded.first);
    r.text = std::move(encoded.second);
    const FilteredText filtered = text_filter(r.text, cfg_.n_q);
    r.attn = cross_attend(filtered, r.image_features);
    r.selection = dynamic_point_select(r.attn.score_map, cfg_.n_q, cfg_.w_dist, r.image_features);
    r.queries = assemble_queries(r.selection, r.attn, params_);
    r.pyramid = build_pyramid(r.image_features, params_, cfg_.levels);
    r.decoded = decode(r.queries, r.pyramid, params_, cfg_.depth, cfg_.heads,
                       cfg_.points_per_level);
    r.seg = global_decode(r.pyramid, params_, cfg_.mask_size(), cfg_.mask_size());
    r.masks = instance_masks(r.decoded, r.seg.semantic, params_);
    return r;
  }

  SceneGroundTruth ground_truth(const Scene& scene) const {
    return rasterize_ground_truth(scene, cfg_.mask_size(), cfg_.mask_size());
  }

  LossReport scene_loss(const ForwardResult& fwd, const SceneGroundTruth& gt,
                        bool non_target) const {
    Assignment assignment;
    assignment.query_to_target.assign(static_cast<std::size_t>(fwd.decoded.count), -1);
    if (!gt.instances.empty()) {
      const CostMatrix cost = build_cost(fwd.decoded, gt, cfg_.match);
      assignment = hungarian(cost);
    }
    const Assignment q2m = align_masks(assignment, static_cast<int>(gt.instances.size()),
                                       static_cast<int>(gt.instances.size()));
    const double l_detr = detr_loss(fwd.decoded, assignment, gt);
    const double l_seg = bce_dice(fwd.seg.mask_logits, gt.global_mask);
    const double l_ins = instance_seg_loss(fwd.masks, q2m, gt, cfg_.loss.neg);
    const double l_exist = existence_loss(fwd.seg.existence_logit, non_target);
    return total_loss(l_detr, l_seg, l_ins, l_exist, cfg_.loss);
  }

  FinalOutput postprocess_scene(const ForwardResult& fwd) const {
    Vec fg_probs(fwd.decoded.fg_logits.size());
    for (std::size_t i = 0; i < fg_probs.size(); ++i) {
      fg_probs[i] = sigmoid(fwd.decoded.fg_logits[i]);
    }
    const double existence = sigmoid(fwd.seg.existence_logit);
    return postprocess(fg_probs, existence, fwd.decoded.boxes, fwd.seg.mask_logits,
                       fwd.masks.logits, cfg_.postprocess_config());
  }

 private:
  RunConfig cfg_;
  ParamStore params_;
};

inline SceneRecord make_scene_record(const FinalOutput& out, const SceneGroundTruth& gt) {
  SceneRecord rec;
  for (const Detection& d : out.detections) {
    rec.boxes.push_back(d.box);
    rec.scores.push_back(d.score);
  }
  rec.mask = out.mask;
  rec.predicted_non_target = out.non_target;
  for (const InstanceTruth& inst : gt.instances) rec.gt_boxes.push_back(inst.box);
  rec.gt_mask = gt.global_mask;
  rec.gt_non_target = gt.instances.empty();
  return rec;
}

}  // namespace gvg
