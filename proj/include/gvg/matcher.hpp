#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gvg/box.hpp"
#include "gvg/deform_decoder.hpp"
#include "gvg/numerics.hpp"
#include "gvg/scene.hpp"

namespace gvg {

struct CostWeights {
  double cls = 1.0;
  double box = 5.0;
  double giou = 2.0;
  double point = 2.0;
};

struct CostMatrix {
  int n_queries = 0;
  int n_targets = 0;
  Vec data;  // row-major queries x targets
  CostWeights weights;

  double at(int q, int t) const { return data[static_cast<std::size_t>(q) * n_targets + t]; }
};

/// One-to-one partial map from queries to targets; exactly
/// min(N_q, N_gt) pairs.
struct Assignment {
  std::vector<int> query_to_target;  // -1 when unmatched

  std::vector<std::pair<int, int>> pairs() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t q = 0; q < query_to_target.size(); ++q) {
      if (query_to_target[q] >= 0) out.emplace_back(static_cast<int>(q), query_to_target[q]);
    }
    return out;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (int t : query_to_target) n += t >= 0 ? 1 : 0;
    return n;
  }
};

inline double cls_cost(double fg_prob) { return -std::log(std::max(fg_prob, 1e-300)); }

/// Matching cost: weighted class CE, box L1, (1 - GIoU), and the L1 distance
/// between the query's prior point and the target's center, all over
/// normalized coordinates.
inline CostMatrix build_cost(const DecodedQuerySet& preds, const SceneGroundTruth& gt,
                             const CostWeights& weights) {
  if (gt.instances.empty()) throw std::invalid_argument("build_cost: no targets");
  CostMatrix cost;
  cost.n_queries = preds.count;
  cost.n_targets = static_cast<int>(gt.instances.size());
  cost.weights = weights;
  cost.data.resize(static_cast<std::size_t>(cost.n_queries) * cost.n_targets);
  for (int q = 0; q < cost.n_queries; ++q) {
    const double fg = sigmoid(preds.fg_logits[static_cast<std::size_t>(q)]);
    const BoxCxCyWh& pb = preds.boxes[static_cast<std::size_t>(q)];
    const Point& pr = preds.ref_points[static_cast<std::size_t>(q)];
    for (int t = 0; t < cost.n_targets; ++t) {
      const BoxCxCyWh& tb = gt.instances[static_cast<std::size_t>(t)].box;
      const double point_l1 = std::abs(pr.x - tb.cx) + std::abs(pr.y - tb.cy);
      cost.data[static_cast<std::size_t>(q) * cost.n_targets + t] =
          weights.cls * cls_cost(fg) + weights.box * box_l1(pb, tb) +
          weights.giou * (1.0 - giou(pb, tb)) + weights.point * point_l1;
    }
  }
  return cost;
}

namespace detail {

/// Jonker-Volgenant shortest augmenting path solver for n <= m rectangular
/// cost matrices; returns the minimizing row-to-column map.
inline std::vector<int> lap_solve(const Vec& cost, int n, int m) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur =
            cost[static_cast<std::size_t>(i0 - 1) * m + (j - 1)] - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[static_cast<std::size_t>(j)] > 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
  }
  return row_to_col;
}

/// Minimal completion cost for the free rows x free columns subproblem,
/// matching min(|rows|, |cols|) pairs. Totals are accumulated in ascending
/// row order so equal assignments compare bitwise equal.
inline double tail_cost(const CostMatrix& cost, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(cols.size());
  Vec sub;
  std::vector<int> r2c;
  if (n <= m) {
    sub.reserve(static_cast<std::size_t>(n) * m);
    for (int r : rows) {
      for (int c : cols) sub.push_back(cost.at(r, c));
    }
    r2c = lap_solve(sub, n, m);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost.at(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(r2c[static_cast<std::size_t>(i)])]);
    return total;
  }
  sub.reserve(static_cast<std::size_t>(n) * m);
  for (int c : cols) {
    for (int r : rows) sub.push_back(cost.at(r, c));
  }
  const std::vector<int> c2r = lap_solve(sub, m, n);
  std::vector<std::pair<int, int>> picked;  // (row, col), then ascending-row total
  for (int j = 0; j < m; ++j) picked.emplace_back(rows[static_cast<std::size_t>(c2r[static_cast<std::size_t>(j)])], cols[static_cast<std::size_t>(j)]);
  std::sort(picked.begin(), picked.end());
  double total = 0.0;
  for (const auto& [r, c] : picked) total += cost.at(r, c);
  return total;
}

}  // namespace detail

/// Minimum-cost one-to-one assignment. Among optimal assignments the result
/// is the lexicographically smallest query-to-target vector, with unmatched
/// treated as larger than any target index (earlier queries prefer matching,
/// and matching the smallest target).
inline Assignment hungarian(const CostMatrix& cost) {
  if (!all_finite(cost.data)) throw std::invalid_argument("hungarian: non-finite costs");
  const int n_q = cost.n_queries;
  const int n_t = cost.n_targets;
  Assignment out;
  out.query_to_target.assign(static_cast<std::size_t>(n_q), -1);
  if (n_q == 0 || n_t == 0) return out;

  std::vector<char> used_target(static_cast<std::size_t>(n_t), 0);
  double prefix = 0.0;
  int matched = 0;
  for (int q = 0; q < n_q; ++q) {
    std::vector<int> tail_rows;
    for (int r = q + 1; r < n_q; ++r) tail_rows.push_back(r);

    int best_choice = -2;  // -1 encodes "leave q unmatched"
    double best_total = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n_t; ++t) {
      if (used_target[static_cast<std::size_t>(t)]) continue;
      std::vector<int> tail_cols;
      for (int c = 0; c < n_t; ++c) {
        if (!used_target[static_cast<std::size_t>(c)] && c != t) tail_cols.push_back(c);
      }
      const double total =
          prefix + cost.at(q, t) + detail::tail_cost(cost, tail_rows, tail_cols);
      if (total < best_total) {
        best_total = total;
        best_choice = t;
      }
    }
    const int targets_left = n_t - matched;
    if (static_cast<int>(tail_rows.size()) >= targets_left) {
      // Leaving q unmatched stays feasible; preferred only on a strict win.
      std::vector<int> tail_cols;
      for (int c = 0; c < n_t; ++c) {
        if (!used_target[static_cast<std::size_t>(c)]) tail_cols.push_back(c);
      }
      const double total = prefix + detail::tail_cost(cost, tail_rows, tail_cols);
      if (total < best_total) {
        best_total = total;
        best_choice = -1;
      }
    }
    if (best_choice >= 0) {
      out.query_to_target[static_cast<std::size_t>(q)] = best_choice;
      used_target[static_cast<std::size_t>(best_choice)] = 1;
      prefix += cost.at(q, best_choice);
      ++matched;
      if (matched == std::min(n_q, n_t)) break;
    }
  }
  return out;
}

/// Propagates the query-to-box assignment onto masks. Boxes and masks are
/// index-aligned by construction; the map itself is unchanged.
inline Assignment align_masks(const Assignment& query_to_box, int n_gt_boxes, int n_gt_masks) {
  if (n_gt_boxes != n_gt_masks) {
    throw std::invalid_argument("align_masks: box/mask ground truth misaligned");
  }
  return query_to_box;
}

}  // namespace gvg
