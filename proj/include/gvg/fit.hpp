#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gvg/pipeline.hpp"

namespace gvg {

inline constexpr double kFitDemoDefaultLr = 2.0;
inline constexpr double kFitMomentum = 0.9;

/// The detection head sees much smaller gradients than the mask projection;
/// this fixed rescaling keeps a single learning rate workable for both.
inline constexpr double kFitBoxGradScale = 3.0;

/// Gradient descent on the box head and mask projection with
/// central-difference gradients over a small fixed batch. The rest of the
/// network is frozen, so per-scene decoder and segmentation outputs are
/// cached once.
class FitDemo {
 public:
  static const std::vector<std::string>& parameter_prefixes() {
    // the decoder prediction head (box + foreground) and the mask projection
    static const std::vector<std::string> prefixes = {"head.", "piph.query_proj."};
    return prefixes;
  }

  FitDemo(Model& model, const std::vector<Scene>& scenes) : model_(model) {
    for (const Scene& scene : scenes) {
      const ForwardResult fwd = model.forward(scene);
      SceneCtx ctx;
      ctx.gt = model.ground_truth(scene);
      ctx.non_target = scene.non_target;
      ctx.decoded.count = fwd.decoded.count;
      ctx.decoded.channels = fwd.decoded.channels;
      ctx.decoded.embeddings = fwd.decoded.embeddings;
      ctx.decoded.ref_points = fwd.decoded.ref_points;
      ctx.semantic = fwd.seg.semantic;
      ctx.l_seg = bce_dice(fwd.seg.mask_logits, ctx.gt.global_mask);
      ctx.l_exist = existence_loss(fwd.seg.existence_logit, ctx.non_target);
      scenes_.push_back(std::move(ctx));
    }
  }

  /// Mean loss over the batch with the current parameters; only the parts
  /// downstream of the tuned heads are recomputed.
  LossReport evaluate(const ParamStore& params) const {
    const RunConfig& cfg = model_.config();
    LossReport mean;
    for (const SceneCtx& ctx : scenes_) {
      DecodedQuerySet decoded = ctx.decoded;
      apply_prediction_heads(params, decoded);
      Assignment assignment;
      assignment.query_to_target.assign(static_cast<std::size_t>(decoded.count), -1);
      if (!ctx.gt.instances.empty()) {
        assignment = hungarian(build_cost(decoded, ctx.gt, cfg.match));
      }
      const InstanceMasks masks = instance_masks(decoded, ctx.semantic, params);
      const double l_detr = detr_loss(decoded, assignment, ctx.gt);
      const double l_ins = instance_seg_loss(masks, assignment, ctx.gt, cfg.loss.neg);
      const LossReport r = total_loss(l_detr, ctx.l_seg, l_ins, ctx.l_exist, cfg.loss);
      mean.detr += r.detr;
      mean.seg += r.seg;
      mean.instance_seg += r.instance_seg;
      mean.exist += r.exist;
      mean.total += r.total;
    }
    const double n = static_cast<double>(scenes_.size());
    mean.detr /= n;
    mean.seg /= n;
    mean.instance_seg /= n;
    mean.exist /= n;
    mean.total /= n;
    return mean;
  }

  /// Runs `steps` heavy-ball descent steps; returns the loss history with
  /// the initial loss at index 0. Throws NumericalError naming the step on
  /// divergence.
  ///
  /// The central differences are split by structure: prediction-head
  /// parameters only reach the loss through the weighted detection term
  /// (segmentation and existence terms cancel between the two perturbed
  /// evaluations), and the mask projection only reaches it through the
  /// weighted instance term, for which the assignment of the unperturbed
  /// parameters is held fixed.
  std::vector<LossReport> run(int steps, double lr, double h = 1e-4) {
    if (steps < 1) throw std::invalid_argument("fit-demo: steps must be >= 1");
    if (lr < 0.0) throw std::invalid_argument("fit-demo: negative learning rate");
    ParamStore& params = model_.params();
    const std::vector<std::string> head_names = params.names_with_prefix({"head."});
    const std::vector<std::string> proj_names = params.names_with_prefix({"piph.query_proj."});
    const double w_detr = model_.config().loss.detr;
    const double w_ins = model_.config().loss.instance;
    std::map<std::string, Vec> velocity;

    std::vector<LossReport> history;
    history.push_back(evaluate(params));
    for (int step = 0; step < steps; ++step) {
      const std::vector<Assignment> assignments = current_assignments(params);
      auto head_grads = numeric_gradient(
          [&](ParamStore& p) { return w_detr * detr_term(p); }, params, head_names, h);
      auto proj_grads = numeric_gradient(
          [&](ParamStore& p) { return w_ins * instance_term(p, assignments); }, params,
          proj_names, h);
      auto apply = [&](const std::map<std::string, Vec>& grads, double scale) {
        for (const auto& [name, grad] : grads) {
          Vec& vel = velocity.try_emplace(name, Vec(grad.size(), 0.0)).first->second;
          Tensor& t = params.require(name);
          for (std::size_t i = 0; i < grad.size(); ++i) {
            vel[i] = kFitMomentum * vel[i] + scale * grad[i];
            t.data[i] -= lr * vel[i];
          }
        }
      };
      apply(head_grads, kFitBoxGradScale);
      apply(proj_grads, 1.0);
      const LossReport r = evaluate(params);
      if (!std::isfinite(r.total)) {
        throw NumericalError("fit-demo: non-finite loss at step " + std::to_string(step));
      }
      history.push_back(r);
    }
    return history;
  }

 private:
  struct SceneCtx {
    SceneGroundTruth gt;
    bool non_target = false;
    DecodedQuerySet decoded;  // embeddings and ref points only
    Grid semantic;
    double l_seg = 0.0;
    double l_exist = 0.0;
  };

  std::vector<Assignment> current_assignments(const ParamStore& params) const {
    const RunConfig& cfg = model_.config();
    std::vector<Assignment> out;
    for (const SceneCtx& ctx : scenes_) {
      DecodedQuerySet decoded = ctx.decoded;
      apply_prediction_heads(params, decoded);
      Assignment a;
      a.query_to_target.assign(static_cast<std::size_t>(decoded.count), -1);
      if (!ctx.gt.instances.empty()) a = hungarian(build_cost(decoded, ctx.gt, cfg.match));
      out.push_back(std::move(a));
    }
    return out;
  }

  /// Mean detection loss over the batch (matching recomputed each call).
  double detr_term(const ParamStore& params) const {
    const RunConfig& cfg = model_.config();
    double sum = 0.0;
    for (const SceneCtx& ctx : scenes_) {
      DecodedQuerySet decoded = ctx.decoded;
      apply_prediction_heads(params, decoded);
      Assignment a;
      a.query_to_target.assign(static_cast<std::size_t>(decoded.count), -1);
      if (!ctx.gt.instances.empty()) a = hungarian(build_cost(decoded, ctx.gt, cfg.match));
      sum += detr_loss(decoded, a, ctx.gt);
    }
    return sum / static_cast<double>(scenes_.size());
  }

  /// Mean instance segmentation loss over the batch under fixed assignments.
  double instance_term(const ParamStore& params, const std::vector<Assignment>& assignments) const {
    const RunConfig& cfg = model_.config();
    double sum = 0.0;
    for (std::size_t s = 0; s < scenes_.size(); ++s) {
      const SceneCtx& ctx = scenes_[s];
      DecodedQuerySet decoded = ctx.decoded;  // embeddings only; heads not needed
      const InstanceMasks masks = instance_masks(decoded, ctx.semantic, params);
      sum += instance_seg_loss(masks, assignments[s], ctx.gt, cfg.loss.neg);
    }
    return sum / static_cast<double>(scenes_.size());
  }

  Model& model_;
  std::vector<SceneCtx> scenes_;
};

/// The demo batch: four deterministic multi-instance scenes derived from the
/// run seed.
inline std::vector<Scene> fit_demo_scenes(const RunConfig& cfg) {
  GeneratorConfig gen = cfg.scene_generator();
  gen.min_instances = 2;
  gen.max_instances = 3;
  gen.non_target_rate = 0.0;
  std::vector<Scene> scenes;
  for (int i = 0; i < 4; ++i) {
    Scene s = generate_scene(detail::splitmix64(cfg.seed * 0x9e3779b97f4a7c15ull + 0xf17dull + i),
                             gen);
    s.id = i;
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace gvg
