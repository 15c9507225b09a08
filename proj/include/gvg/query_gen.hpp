#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gvg/grid.hpp"
#include "gvg/numerics.hpp"
#include "gvg/params.hpp"
#include "gvg/scene.hpp"

namespace gvg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Top-norm text tokens padded to a fixed row count.
struct FilteredText {
  int count = 0;     // always N_q rows
  int channels = 0;
  Vec features;      // N_q x C
  std::vector<std::uint8_t> valid;
};

/// Keeps the N_q highest-L2-norm valid tokens (descending norm, ties by
/// ascending index); with fewer valid tokens, keeps them all in sequence
/// order and zero-pads.
inline FilteredText text_filter(const TextSequence& seq, int n_q) {
  if (n_q < 1) throw std::invalid_argument("text_filter: n_q must be >= 1");
  FilteredText out;
  out.count = n_q;
  out.channels = seq.channels;
  out.features.assign(static_cast<std::size_t>(n_q) * seq.channels, 0.0);
  out.valid.assign(static_cast<std::size_t>(n_q), 0);

  std::vector<int> valid_idx;
  for (int i = 0; i < seq.count; ++i) {
    if (seq.valid[static_cast<std::size_t>(i)]) valid_idx.push_back(i);
  }

  std::vector<int> chosen;
  if (static_cast<int>(valid_idx.size()) >= n_q) {
    const Vec scores = l2_norm_scores(seq);
    Vec valid_scores(valid_idx.size());
    for (std::size_t i = 0; i < valid_idx.size(); ++i) {
      valid_scores[i] = scores[static_cast<std::size_t>(valid_idx[i])];
    }
    for (int pos : top_k(valid_scores, n_q)) chosen.push_back(valid_idx[static_cast<std::size_t>(pos)]);
  } else {
    chosen = valid_idx;
  }

  for (std::size_t row = 0; row < chosen.size(); ++row) {
    const double* src = seq.row(chosen[row]);
    std::copy(src, src + seq.channels,
              out.features.data() + row * static_cast<std::size_t>(seq.channels));
    out.valid[row] = 1;
  }
  return out;
}

/// Scaled dot-product cross-attention of filtered text rows over image cells.
struct AttnOutputs {
  int n_queries = 0;
  int n_cells = 0;
  int channels = 0;
  Vec weights;        // N_q x N_i, valid rows sum to 1, padded rows all zero
  Vec attended;       // N_q x C
  Grid score_map;     // h x w x 1, mean of weights over valid rows (pre-sigmoid)
  bool no_valid_rows = false;
};

inline AttnOutputs cross_attend(const FilteredText& filtered, const Grid& image) {
  if (filtered.channels != image.channels) {
    throw std::invalid_argument("cross_attend: channel mismatch");
  }
  const int n_q = filtered.count;
  const int n_i = image.cells();
  const int c = image.channels;
  AttnOutputs out;
  out.n_queries = n_q;
  out.n_cells = n_i;
  out.channels = c;
  out.weights.assign(static_cast<std::size_t>(n_q) * n_i, 0.0);
  out.attended.assign(static_cast<std::size_t>(n_q) * c, 0.0);
  out.score_map = Grid::zeros(image.height, image.width, 1);

  const double scale = 1.0 / std::sqrt(static_cast<double>(c));
  int valid_rows = 0;
  for (int q = 0; q < n_q; ++q) {
    if (!filtered.valid[static_cast<std::size_t>(q)]) continue;
    ++valid_rows;
    const double* query = filtered.features.data() + static_cast<std::size_t>(q) * c;
    Vec logits(static_cast<std::size_t>(n_i));
    for (int i = 0; i < n_i; ++i) {
      logits[static_cast<std::size_t>(i)] = dot(query, image.values.data() + static_cast<std::size_t>(i) * c, c) * scale;
    }
    const Vec row = softmax(logits);
    double* wrow = out.weights.data() + static_cast<std::size_t>(q) * n_i;
    std::copy(row.begin(), row.end(), wrow);
    double* arow = out.attended.data() + static_cast<std::size_t>(q) * c;
    for (int i = 0; i < n_i; ++i) {
      const double* cell = image.values.data() + static_cast<std::size_t>(i) * c;
      for (int k = 0; k < c; ++k) arow[k] += wrow[i] * cell[k];
    }
    for (int i = 0; i < n_i; ++i) out.score_map.values[static_cast<std::size_t>(i)] += wrow[i];
  }
  if (valid_rows == 0) {
    out.no_valid_rows = true;  // score map stays all zero
  } else {
    for (double& v : out.score_map.values) v /= valid_rows;
  }
  return out;
}

/// Greedy selection output: distinct cells, their normalized coordinates,
/// and the image features gathered there.
struct PointSelection {
  std::vector<int> cells;      // row-major indices, pairwise distinct
  std::vector<Point> points;   // align-corners normalized node coordinates
  Vec features;                // N_q x C
};

/// Greedy maximum of sigmoid(score) + w_dist * min-distance-to-selected
/// (distance in grid cells). First pick is the plain argmax. Ties break to
/// the smallest row-major cell index.
inline PointSelection dynamic_point_select(const Grid& score_map, int n_q, double w_dist,
                                           const Grid& image) {
  if (score_map.channels != 1) throw std::invalid_argument("dynamic_point_select: score map must have 1 channel");
  if (w_dist < 0.0) throw std::invalid_argument("dynamic_point_select: negative w_dist");
  const int h = score_map.height;
  const int w = score_map.width;
  const int n_cells = h * w;
  if (n_q > n_cells) throw std::invalid_argument("dynamic_point_select: n_q exceeds cell count");
  if (image.height != h || image.width != w) {
    throw std::invalid_argument("dynamic_point_select: image/score map size mismatch");
  }

  Vec sig(static_cast<std::size_t>(n_cells));
  for (int i = 0; i < n_cells; ++i) sig[static_cast<std::size_t>(i)] = sigmoid(score_map.values[static_cast<std::size_t>(i)]);

  std::vector<char> taken(static_cast<std::size_t>(n_cells), 0);
  // Min squared distance (in cells) from each candidate to the selected set.
  Vec min_d2(static_cast<std::size_t>(n_cells), 0.0);

  PointSelection out;
  for (int pick = 0; pick < n_q; ++pick) {
    int best = -1;
    double best_score = 0.0;
    for (int i = 0; i < n_cells; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double s = pick == 0 ? sig[static_cast<std::size_t>(i)]
                                 : sig[static_cast<std::size_t>(i)] +
                                       w_dist * std::sqrt(min_d2[static_cast<std::size_t>(i)]);
      if (best < 0 || s > best_score) {
        best = i;
        best_score = s;
      }
    }
    taken[static_cast<std::size_t>(best)] = 1;
    const int by = best / w;
    const int bx = best % w;
    out.cells.push_back(best);
    out.points.push_back({w > 1 ? static_cast<double>(bx) / (w - 1) : 0.0,
                          h > 1 ? static_cast<double>(by) / (h - 1) : 0.0});
    const double* feat = image.cell(by, bx);
    out.features.insert(out.features.end(), feat, feat + image.channels);
    for (int i = 0; i < n_cells; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double dy = i / w - by;
      const double dx = i % w - bx;
      const double d2 = dx * dx + dy * dy;
      if (pick == 0 || d2 < min_d2[static_cast<std::size_t>(i)]) min_d2[static_cast<std::size_t>(i)] = d2;
    }
  }
  return out;
}

struct InstanceQuerySet {
  int count = 0;
  int channels = 0;
  Vec queries;                 // N_q x C
  std::vector<Point> points;   // prior reference points, normalized
  std::vector<int> cells;
  Vec selected;                // N_q x C image features at the chosen cells
};

inline void register_query_mlp(ParamStore& params, int channels) {
  register_mlp(params, "iqg.query_mlp", {2 * channels, channels, channels});
}

/// Query i = MLP(concat(selected feature i, attended row i)); padded
/// attention rows contribute zeros.
inline InstanceQuerySet assemble_queries(const PointSelection& selection,
                                         const AttnOutputs& attn, const ParamStore& params) {
  const int n_q = static_cast<int>(selection.cells.size());
  const int c = attn.channels;
  if (attn.n_queries != n_q) throw ConfigError("assemble_queries: row count mismatch");
  if (static_cast<int>(selection.features.size()) != n_q * c) {
    throw ConfigError("assemble_queries: selected feature size mismatch");
  }
  InstanceQuerySet out;
  out.count = n_q;
  out.channels = c;
  out.points = selection.points;
  out.cells = selection.cells;
  out.selected = selection.features;
  out.queries.reserve(static_cast<std::size_t>(n_q) * c);
  for (int q = 0; q < n_q; ++q) {
    Vec input(static_cast<std::size_t>(2 * c));
    std::copy(selection.features.begin() + static_cast<std::size_t>(q) * c,
              selection.features.begin() + static_cast<std::size_t>(q + 1) * c, input.begin());
    std::copy(attn.attended.begin() + static_cast<std::size_t>(q) * c,
              attn.attended.begin() + static_cast<std::size_t>(q + 1) * c,
              input.begin() + c);
    const Vec query = mlp_forward(params, "iqg.query_mlp", input);
    out.queries.insert(out.queries.end(), query.begin(), query.end());
  }
  return out;
}

/// Mean over scenes of (boxes containing at least one point) / (all boxes);
/// scenes without ground-truth boxes are skipped. Returns 0 when every scene
/// is skipped.
inline double cover_acc(const std::vector<std::vector<Point>>& per_scene_points,
                        const std::vector<const SceneGroundTruth*>& gts) {
  if (per_scene_points.size() != gts.size()) {
    throw std::invalid_argument("cover_acc: scene count mismatch");
  }
  double sum = 0.0;
  int counted = 0;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    const SceneGroundTruth& gt = *gts[s];
    if (gt.instances.empty()) continue;
    int covered = 0;
    for (const InstanceTruth& inst : gt.instances) {
      const bool hit = std::any_of(per_scene_points[s].begin(), per_scene_points[s].end(),
                                   [&](const Point& p) { return inst.box.contains(p.x, p.y); });
      if (hit) ++covered;
    }
    sum += static_cast<double>(covered) / static_cast<double>(gt.instances.size());
    ++counted;
  }
  return counted > 0 ? sum / counted : 0.0;
}

}  // namespace gvg
