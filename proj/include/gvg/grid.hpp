#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gvg/numerics.hpp"

namespace gvg {

/// Dense h x w x C feature map, row-major [y][x][c].
struct Grid {
  int height = 0;
  int width = 0;
  int channels = 0;
  Vec values;

  static Grid zeros(int h, int w, int c) {
    Grid g;
    g.height = h;
    g.width = w;
    g.channels = c;
    g.values.assign(static_cast<std::size_t>(h) * w * c, 0.0);
    return g;
  }

  int cells() const { return height * width; }

  double& at(int y, int x, int c) {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const double* cell(int y, int x) const {
    return values.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  double* cell(int y, int x) {
    return values.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
};

/// Bilinear lookup at a normalized (x, y) in [0,1]^2, align-corners
/// (node i sits at i/(n-1); a 1-wide axis collapses to its single node).
/// Out-of-range coordinates clamp to the border.
inline Vec bilinear_sample(const Grid& grid, double x, double y) {
  if (grid.height <= 0 || grid.width <= 0) {
    throw std::invalid_argument("bilinear_sample: degenerate grid");
  }
  x = std::clamp(x, 0.0, 1.0);
  y = std::clamp(y, 0.0, 1.0);
  const double gx = grid.width > 1 ? x * (grid.width - 1) : 0.0;
  const double gy = grid.height > 1 ? y * (grid.height - 1) : 0.0;
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const int x1 = std::min(x0 + 1, grid.width - 1);
  const int y1 = std::min(y0 + 1, grid.height - 1);
  const double fx = gx - x0;
  const double fy = gy - y0;

  Vec out(static_cast<std::size_t>(grid.channels));
  const double* v00 = grid.cell(y0, x0);
  const double* v10 = grid.cell(y0, x1);
  const double* v01 = grid.cell(y1, x0);
  const double* v11 = grid.cell(y1, x1);
  for (int c = 0; c < grid.channels; ++c) {
    const double top = (1.0 - fx) * v00[c] + fx * v10[c];
    const double bot = (1.0 - fx) * v01[c] + fx * v11[c];
    out[static_cast<std::size_t>(c)] = (1.0 - fy) * top + fy * bot;
  }
  return out;
}

/// 2x average pooling with ceil semantics; partial edge windows average
/// over the cells actually present.
inline Grid avg_pool2(const Grid& g) {
  const int oh = (g.height + 1) / 2;
  const int ow = (g.width + 1) / 2;
  Grid out = Grid::zeros(oh, ow, g.channels);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const int y1 = std::min(2 * y + 2, g.height);
      const int x1 = std::min(2 * x + 2, g.width);
      const int n = (y1 - 2 * y) * (x1 - 2 * x);
      double* o = out.cell(y, x);
      for (int yy = 2 * y; yy < y1; ++yy) {
        for (int xx = 2 * x; xx < x1; ++xx) {
          const double* v = g.cell(yy, xx);
          for (int c = 0; c < g.channels; ++c) o[c] += v[c];
        }
      }
      for (int c = 0; c < g.channels; ++c) o[c] /= n;
    }
  }
  return out;
}

/// Align-corners bilinear resize to (out_h, out_w).
inline Grid resize_bilinear(const Grid& g, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_bilinear: bad size");
  Grid out = Grid::zeros(out_h, out_w, g.channels);
  for (int y = 0; y < out_h; ++y) {
    const double ny = out_h > 1 ? static_cast<double>(y) / (out_h - 1) : 0.0;
    for (int x = 0; x < out_w; ++x) {
      const double nx = out_w > 1 ? static_cast<double>(x) / (out_w - 1) : 0.0;
      const Vec v = bilinear_sample(g, nx, ny);
      std::copy(v.begin(), v.end(), out.cell(y, x));
    }
  }
  return out;
}

}  // namespace gvg
