#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gvg/deform_decoder.hpp"
#include "gvg/grid.hpp"
#include "gvg/mask.hpp"
#include "gvg/matcher.hpp"
#include "gvg/numerics.hpp"
#include "gvg/params.hpp"
#include "gvg/scene.hpp"
#include "gvg/seg_head.hpp"

namespace gvg {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LossWeights {
  double detr = 0.1;
  double seg = 1.0;
  double instance = 1.0;
  double exist = 0.2;
  double neg = 0.2;
};

struct LossReport {
  double detr = 0.0;
  double seg = 0.0;
  double instance_seg = 0.0;
  double exist = 0.0;
  double total = 0.0;
};

/// Matched pairs contribute box L1 + (1 - GIoU) + foreground CE; unmatched
/// queries contribute background CE. Normalized by max(N_gt, 1).
inline double detr_loss(const DecodedQuerySet& preds, const Assignment& assignment,
                        const SceneGroundTruth& gt) {
  double sum = 0.0;
  for (int q = 0; q < preds.count; ++q) {
    const double fg = sigmoid(preds.fg_logits[static_cast<std::size_t>(q)]);
    const int t = assignment.query_to_target[static_cast<std::size_t>(q)];
    if (t >= 0) {
      const BoxCxCyWh& tb = gt.instances[static_cast<std::size_t>(t)].box;
      sum += box_l1(preds.boxes[static_cast<std::size_t>(q)], tb);
      sum += 1.0 - giou(preds.boxes[static_cast<std::size_t>(q)], tb);
      sum += cls_cost(fg);
    } else {
      sum += cls_cost(1.0 - fg);
    }
  }
  return sum / std::max<std::size_t>(gt.instances.size(), 1);
}

/// Mean binary cross-entropy over logits plus a smoothed Dice term
/// (epsilon 1 in both numerator and denominator).
inline double bce_dice(const Grid& logits, const BinaryMask& target) {
  if (logits.channels != 1 || logits.height != target.height || logits.width != target.width) {
    throw std::invalid_argument("bce_dice: shape mismatch");
  }
  const std::size_t n = logits.values.size();
  double bce = 0.0;
  double inter = 0.0;
  double psum = 0.0;
  double gsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double logit = logits.values[i];
    const double y = target.data[i] ? 1.0 : 0.0;
    // max(l,0) - l*y + log(1+exp(-|l|))
    bce += std::max(logit, 0.0) - logit * y + softplus(-std::abs(logit));
    const double p = sigmoid(logit);
    inter += p * y;
    psum += p;
    gsum += y;
  }
  bce /= static_cast<double>(n);
  const double dice = 1.0 - (2.0 * inter + 1.0) / (psum + gsum + 1.0);
  return bce + dice;
}

/// Positive pairs averaged over N_pos, negatives (vs all-zero targets)
/// averaged over N_neg and weighted by lambda_neg; empty groups are dropped.
/// Positive terms are accumulated in target order and negative terms in
/// value order, so the loss is invariant under a simultaneous permutation of
/// queries and assignment.
inline double instance_seg_loss(const InstanceMasks& masks, const Assignment& q2m,
                                const SceneGroundTruth& gt, double lambda_neg) {
  const int n_q = static_cast<int>(masks.logits.size());
  if (static_cast<int>(q2m.query_to_target.size()) != n_q) {
    throw std::invalid_argument("instance_seg_loss: assignment size mismatch");
  }
  std::map<int, int> target_to_query;
  Vec neg_terms;
  for (int q = 0; q < n_q; ++q) {
    const int t = q2m.query_to_target[static_cast<std::size_t>(q)];
    if (t >= 0) {
      target_to_query[t] = q;
    } else if (lambda_neg != 0.0) {
      const Grid& g = masks.logits[static_cast<std::size_t>(q)];
      neg_terms.push_back(bce_dice(g, BinaryMask::zeros(g.height, g.width)));
    }
  }
  double loss = 0.0;
  if (!target_to_query.empty()) {
    double pos = 0.0;
    for (const auto& [t, q] : target_to_query) {
      pos += bce_dice(masks.logits[static_cast<std::size_t>(q)],
                      gt.instances[static_cast<std::size_t>(t)].mask);
    }
    loss += pos / static_cast<double>(target_to_query.size());
  }
  const int n_neg = n_q - static_cast<int>(q2m.size());
  if (lambda_neg != 0.0 && n_neg > 0) {
    std::sort(neg_terms.begin(), neg_terms.end());
    double neg = 0.0;
    for (double v : neg_terms) neg += v;
    loss += lambda_neg * neg / static_cast<double>(n_neg);
  }
  return loss;
}

/// BCE of the existence logit against "targets exist".
inline double existence_loss(double existence_logit, bool non_target) {
  const double y = non_target ? 0.0 : 1.0;
  return std::max(existence_logit, 0.0) - existence_logit * y +
         softplus(-std::abs(existence_logit));
}

inline LossReport total_loss(double detr, double seg, double instance_seg, double exist,
                             const LossWeights& w) {
  LossReport r;
  r.detr = detr;
  r.seg = seg;
  r.instance_seg = instance_seg;
  r.exist = exist;
  r.total = w.detr * detr + w.seg * seg + w.instance * instance_seg + w.exist * exist;
  return r;
}

/// Central-difference gradient of an arbitrary scalar loss with respect to
/// every scalar in the named tensors. The store is restored before return.
inline std::map<std::string, Vec> numeric_gradient(
    const std::function<double(ParamStore&)>& loss_fn, ParamStore& params,
    const std::vector<std::string>& names, double h) {
  if (h <= 0.0) throw std::invalid_argument("numeric_gradient: step must be positive");
  std::map<std::string, Vec> grads;
  for (const std::string& name : names) {
    Tensor& t = params.require(name);
    Vec g(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + h;
      const double fp = loss_fn(params);
      t.data[i] = saved - h;
      const double fm = loss_fn(params);
      t.data[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericalError("numeric_gradient: non-finite loss perturbing " + name + "[" +
                             std::to_string(i) + "]");
      }
      g[i] = (fp - fm) / (2.0 * h);
    }
    grads[name] = std::move(g);
  }
  return grads;
}

}  // namespace gvg
