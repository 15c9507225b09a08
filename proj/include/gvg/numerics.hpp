#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvg {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Numerically stable logistic sigmoid.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// Shift-invariant softmax over a non-empty finite vector.
inline Vec softmax(const Vec& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  if (!all_finite(logits)) throw std::invalid_argument("softmax: non-finite input");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

/// Indices of the k largest scores, descending; ties broken by ascending index.
inline std::vector<int> top_k(const Vec& scores, int k) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  const int n = static_cast<int>(scores.size());
  idx.resize(static_cast<std::size_t>(std::max(0, std::min(k, n))));
  return idx;
}

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// Token embeddings with a padding mask. Row-major count x channels.
struct TextSequence {
  int count = 0;
  int channels = 0;
  Vec values;
  std::vector<std::uint8_t> valid;

  const double* row(int i) const { return values.data() + static_cast<std::size_t>(i) * channels; }
  double* row(int i) { return values.data() + static_cast<std::size_t>(i) * channels; }

  static TextSequence zeros(int count, int channels) {
    TextSequence t;
    t.count = count;
    t.channels = channels;
    t.values.assign(static_cast<std::size_t>(count) * channels, 0.0);
    t.valid.assign(static_cast<std::size_t>(count), 0);
    return t;
  }
};

/// Per-token L2 norms; masked-out tokens score 0.
inline Vec l2_norm_scores(const TextSequence& seq) {
  Vec scores(static_cast<std::size_t>(seq.count), 0.0);
  for (int i = 0; i < seq.count; ++i) {
    if (!seq.valid[static_cast<std::size_t>(i)]) continue;
    double s = 0.0;
    const double* r = seq.row(i);
    for (int c = 0; c < seq.channels; ++c) s += r[c] * r[c];
    scores[static_cast<std::size_t>(i)] = std::sqrt(s);
  }
  return scores;
}

}  // namespace gvg
