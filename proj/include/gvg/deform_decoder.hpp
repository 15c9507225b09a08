#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gvg/box.hpp"
#include "gvg/grid.hpp"
#include "gvg/params.hpp"
#include "gvg/pyramid.hpp"
#include "gvg/query_gen.hpp"

namespace gvg {

namespace detail {

/// Order-canonical sum: addends are sorted by value first, so the result is
/// bitwise independent of the caller's term order.
inline double stable_sum(Vec terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

// Prior points on the grid border would otherwise saturate the center
// sigmoid and freeze its gradient.
inline double logit(double p) {
  p = std::clamp(p, 0.05, 0.95);
  return std::log(p / (1.0 - p));
}

}  // namespace detail

inline void register_deform_attn_params(ParamStore& params, const std::string& prefix,
                                        int channels, int heads, int levels,
                                        int points_per_level) {
  if (channels % heads != 0) throw ConfigError("deform attention: heads must divide channels");
  register_linear(params, prefix + ".offset", channels, heads * levels * points_per_level * 2);
  register_linear(params, prefix + ".weight", channels, heads * levels * points_per_level);
  params.matrix(prefix + ".value.w", channels, channels);
  params.matrix(prefix + ".out.w", channels, channels);
}

/// Multi-scale deformable attention for one query. Offsets and attention
/// logits are affine in the query embedding; attention weights are
/// softmax-normalized per head jointly over the levels x points slots.
/// Offsets are expressed in cells of the sampled level and applied to the
/// align-corners coordinate of the (clamped) reference point.
/// Per-head value rows of value.w act as W'_m; the matching column block of
/// out.w acts as W_m.
inline Vec ms_deform_attn(const Vec& query, Point ref, const PyramidFeatures& pyramid,
                          const ParamStore& params, const std::string& prefix, int heads,
                          int points_per_level) {
  const int c = static_cast<int>(query.size());
  const int levels = static_cast<int>(pyramid.levels.size());
  const int head_dim = c / heads;
  const int slots = levels * points_per_level;

  ref.x = std::clamp(ref.x, 0.0, 1.0);
  ref.y = std::clamp(ref.y, 0.0, 1.0);

  const Vec offsets = linear_forward(params, prefix + ".offset", query);
  const Vec logits = linear_forward(params, prefix + ".weight", query);
  const Tensor& value_w = params.require(prefix + ".value.w");
  const Tensor& out_w = params.require(prefix + ".out.w");

  Vec out(static_cast<std::size_t>(c), 0.0);
  Vec head_acc(static_cast<std::size_t>(head_dim));
  for (int m = 0; m < heads; ++m) {
    Vec slot_logits(logits.begin() + static_cast<std::size_t>(m) * slots,
                    logits.begin() + static_cast<std::size_t>(m + 1) * slots);
    const Vec attn = softmax(slot_logits);

    std::fill(head_acc.begin(), head_acc.end(), 0.0);
    for (int l = 0; l < levels; ++l) {
      const Grid& level = pyramid.levels[static_cast<std::size_t>(l)];
      for (int k = 0; k < points_per_level; ++k) {
        const int slot = l * points_per_level + k;
        const std::size_t o = (static_cast<std::size_t>(m) * slots + slot) * 2;
        const double sx =
            level.width > 1 ? ref.x + offsets[o] / (level.width - 1) : ref.x;
        const double sy =
            level.height > 1 ? ref.y + offsets[o + 1] / (level.height - 1) : ref.y;
        const Vec sample = bilinear_sample(level, sx, sy);
        const double a = attn[static_cast<std::size_t>(slot)];
        for (int r = 0; r < head_dim; ++r) {
          const double* wrow =
              value_w.data.data() + (static_cast<std::size_t>(m) * head_dim + r) * c;
          head_acc[static_cast<std::size_t>(r)] += a * dot(wrow, sample.data(), c);
        }
      }
    }
    for (int r = 0; r < c; ++r) {
      const double* orow = out_w.data.data() + static_cast<std::size_t>(r) * c;
      for (int j = 0; j < head_dim; ++j) {
        out[static_cast<std::size_t>(r)] += orow[m * head_dim + j] * head_acc[static_cast<std::size_t>(j)];
      }
    }
  }
  return out;
}

struct DecodedQuerySet {
  int count = 0;
  int channels = 0;
  Vec embeddings;                   // Q_d, N_q x C
  std::vector<Point> ref_points;    // fixed prior points, order preserved
  Vec box_offsets;                  // raw head outputs, N_q x 4
  std::vector<BoxCxCyWh> boxes;     // sigmoid-parameterized, in [0,1]^4
  Vec fg_logits;                    // N_q
};

inline void register_decoder_params(ParamStore& params, int channels, int heads, int levels,
                                    int points_per_level, int depth) {
  for (int d = 0; d < depth; ++d) {
    const std::string p = "dec." + std::to_string(d);
    register_linear(params, p + ".self.q", channels, channels);
    register_linear(params, p + ".self.k", channels, channels);
    register_linear(params, p + ".self.v", channels, channels);
    register_deform_attn_params(params, p + ".deform", channels, heads, levels,
                                points_per_level);
    register_mlp(params, p + ".ffn", {channels, 2 * channels, channels});
  }
  register_mlp(params, "head.box", {channels, channels, 4});
  register_linear(params, "head.cls", channels, 1);
}

/// Box and foreground heads over decoded embeddings. Box centers are
/// predicted as offsets from the prior point in logit space, so every decoded
/// box lands in [0,1]^4 after the sigmoid.
inline void apply_prediction_heads(const ParamStore& params, DecodedQuerySet& set) {
  const int c = set.channels;
  set.box_offsets.clear();
  set.boxes.clear();
  set.fg_logits.clear();
  set.box_offsets.reserve(static_cast<std::size_t>(set.count) * 4);
  for (int i = 0; i < set.count; ++i) {
    const Vec xi(set.embeddings.begin() + static_cast<std::size_t>(i) * c,
                 set.embeddings.begin() + static_cast<std::size_t>(i + 1) * c);
    const Vec bo = mlp_forward(params, "head.box", xi);
    set.box_offsets.insert(set.box_offsets.end(), bo.begin(), bo.end());
    const Point& pr = set.ref_points[static_cast<std::size_t>(i)];
    BoxCxCyWh box;
    box.cx = sigmoid(detail::logit(pr.x) + bo[0]);
    box.cy = sigmoid(detail::logit(pr.y) + bo[1]);
    box.w = sigmoid(bo[2]);
    box.h = sigmoid(bo[3]);
    set.boxes.push_back(box);
    set.fg_logits.push_back(linear_forward(params, "head.cls", xi)[0]);
  }
}

/// Stacked decoder layers: self-attention over the query set, deformable
/// cross-attention anchored at each query's prior point, and a feed-forward
/// block, all residual. Reference points are not refined across layers.
inline DecodedQuerySet decode(const InstanceQuerySet& queries, const PyramidFeatures& pyramid,
                              const ParamStore& params, int depth, int heads,
                              int points_per_level) {
  if (depth < 1) throw std::invalid_argument("decode: depth must be >= 1");
  const int n_q = queries.count;
  const int c = queries.channels;
  const double scale = 1.0 / std::sqrt(static_cast<double>(c));

  Vec x = queries.queries;
  auto row = [&](Vec& buf, int i) {
    return Vec(buf.begin() + static_cast<std::size_t>(i) * c,
               buf.begin() + static_cast<std::size_t>(i + 1) * c);
  };

  for (int d = 0; d < depth; ++d) {
    const std::string p = "dec." + std::to_string(d);

    // Self-attention, computed from a snapshot so updates are synchronous.
    // Reductions over the query axis use order-canonical sums to keep the
    // layer exactly permutation-equivariant.
    std::vector<Vec> q(static_cast<std::size_t>(n_q)), k(static_cast<std::size_t>(n_q)),
        v(static_cast<std::size_t>(n_q));
    for (int i = 0; i < n_q; ++i) {
      const Vec xi = row(x, i);
      q[static_cast<std::size_t>(i)] = linear_forward(params, p + ".self.q", xi);
      k[static_cast<std::size_t>(i)] = linear_forward(params, p + ".self.k", xi);
      v[static_cast<std::size_t>(i)] = linear_forward(params, p + ".self.v", xi);
    }
    Vec attn_out(static_cast<std::size_t>(n_q) * c, 0.0);
    for (int i = 0; i < n_q; ++i) {
      Vec logits(static_cast<std::size_t>(n_q));
      for (int j = 0; j < n_q; ++j) {
        logits[static_cast<std::size_t>(j)] =
            dot(q[static_cast<std::size_t>(i)].data(), k[static_cast<std::size_t>(j)].data(), c) * scale;
      }
      const double m = *std::max_element(logits.begin(), logits.end());
      Vec e(static_cast<std::size_t>(n_q));
      for (int j = 0; j < n_q; ++j) e[static_cast<std::size_t>(j)] = std::exp(logits[static_cast<std::size_t>(j)] - m);
      const double denom = detail::stable_sum(e);
      for (int ch = 0; ch < c; ++ch) {
        Vec terms(static_cast<std::size_t>(n_q));
        for (int j = 0; j < n_q; ++j) {
          terms[static_cast<std::size_t>(j)] =
              (e[static_cast<std::size_t>(j)] / denom) * v[static_cast<std::size_t>(j)][static_cast<std::size_t>(ch)];
        }
        attn_out[static_cast<std::size_t>(i) * c + ch] = detail::stable_sum(terms);
      }
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += attn_out[i];

    Vec deform_out(static_cast<std::size_t>(n_q) * c);
    for (int i = 0; i < n_q; ++i) {
      const Vec o = ms_deform_attn(row(x, i), queries.points[static_cast<std::size_t>(i)],
                                   pyramid, params, p + ".deform", heads, points_per_level);
      std::copy(o.begin(), o.end(), deform_out.begin() + static_cast<std::size_t>(i) * c);
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += deform_out[i];

    for (int i = 0; i < n_q; ++i) {
      const Vec o = mlp_forward(params, p + ".ffn", row(x, i));
      for (int ch = 0; ch < c; ++ch) x[static_cast<std::size_t>(i) * c + ch] += o[static_cast<std::size_t>(ch)];
    }
  }

  DecodedQuerySet out;
  out.count = n_q;
  out.channels = c;
  out.embeddings = std::move(x);
  out.ref_points = queries.points;
  apply_prediction_heads(params, out);
  return out;
}

}  // namespace gvg
