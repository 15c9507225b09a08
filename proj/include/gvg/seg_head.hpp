#pragma once

#include <stdexcept>
#include <vector>

#include "gvg/deform_decoder.hpp"
#include "gvg/grid.hpp"
#include "gvg/params.hpp"
#include "gvg/pyramid.hpp"

namespace gvg {

/// Global segmentation branch outputs at mask resolution.
struct GlobalSeg {
  Grid semantic;          // H' x W' x C
  Grid mask_logits;       // H' x W' x 1
  double existence_logit = 0.0;
};

struct InstanceMasks {
  std::vector<Grid> logits;  // one H' x W' x 1 grid per query, order-aligned with Q_d
};

inline void register_seg_params(ParamStore& params, int channels) {
  register_linear(params, "seg.mask", channels, 1);
  register_linear(params, "seg.exist", channels, 1);
  // Bias-free so the response masks stay exactly linear in the query.
  params.matrix("piph.query_proj.w", channels, channels);
}

/// Coarse-to-fine merge of the pyramid with additive skips, upsampled to the
/// output resolution. A linear head reads per-cell mask logits and a pooled
/// linear head reads the existence logit.
inline GlobalSeg global_decode(const PyramidFeatures& pyramid, const ParamStore& params,
                               int out_h, int out_w) {
  if (pyramid.levels.empty()) throw std::invalid_argument("global_decode: empty pyramid");
  const int c = pyramid.levels.front().channels;

  Grid merged = pyramid.levels.back();
  for (int l = static_cast<int>(pyramid.levels.size()) - 2; l >= 0; --l) {
    const Grid& skip = pyramid.levels[static_cast<std::size_t>(l)];
    Grid up = resize_bilinear(merged, skip.height, skip.width);
    for (std::size_t i = 0; i < up.values.size(); ++i) up.values[i] += skip.values[i];
    merged = std::move(up);
  }

  GlobalSeg out;
  out.semantic = resize_bilinear(merged, out_h, out_w);
  out.mask_logits = Grid::zeros(out_h, out_w, 1);
  Vec cell(static_cast<std::size_t>(c));
  Vec pooled(static_cast<std::size_t>(c), 0.0);
  for (int i = 0; i < out.semantic.cells(); ++i) {
    const double* src = out.semantic.values.data() + static_cast<std::size_t>(i) * c;
    cell.assign(src, src + c);
    out.mask_logits.values[static_cast<std::size_t>(i)] =
        linear_forward(params, "seg.mask", cell)[0];
    for (int ch = 0; ch < c; ++ch) pooled[static_cast<std::size_t>(ch)] += src[ch];
  }
  for (double& v : pooled) v /= out.semantic.cells();
  out.existence_logit = linear_forward(params, "seg.exist", pooled)[0];
  return out;
}

/// Per-query response masks: the inner product of the projected decoded
/// query with every semantic cell.
inline InstanceMasks instance_masks(const DecodedQuerySet& decoded, const Grid& semantic,
                                    const ParamStore& params) {
  const int c = semantic.channels;
  if (decoded.channels != c) throw ConfigError("instance_masks: channel mismatch");
  const Tensor& proj_w = params.require("piph.query_proj.w");
  if (proj_w.cols() != c) throw ConfigError("instance_masks: projection shape mismatch");
  InstanceMasks out;
  out.logits.reserve(static_cast<std::size_t>(decoded.count));
  for (int i = 0; i < decoded.count; ++i) {
    const double* query = decoded.embeddings.data() + static_cast<std::size_t>(i) * c;
    Vec proj(static_cast<std::size_t>(c));
    for (int r = 0; r < c; ++r) {
      proj[static_cast<std::size_t>(r)] =
          dot(proj_w.data.data() + static_cast<std::size_t>(r) * c, query, c);
    }
    Grid g = Grid::zeros(semantic.height, semantic.width, 1);
    for (int cell = 0; cell < semantic.cells(); ++cell) {
      g.values[static_cast<std::size_t>(cell)] =
          dot(proj.data(), semantic.values.data() + static_cast<std::size_t>(cell) * c, c);
    }
    out.logits.push_back(std::move(g));
  }
  return out;
}

}  // namespace gvg
