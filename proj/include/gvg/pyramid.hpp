#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gvg/grid.hpp"
#include "gvg/params.hpp"

namespace gvg {

/// Multi-scale features built from the single-scale encoder grid.
/// Level l has stride 2^l relative to the base grid.
struct PyramidFeatures {
  std::vector<Grid> levels;
  std::vector<int> strides;
};

inline void register_pyramid_params(ParamStore& params, int channels, int num_levels) {
  for (int l = 0; l < num_levels; ++l) {
    register_linear(params, "pyr." + std::to_string(l), channels, channels);
  }
}

/// Level 0 is the projected base grid; each coarser level is built by 2x
/// average pooling the previous raw content, then projecting.
inline PyramidFeatures build_pyramid(const Grid& image, const ParamStore& params,
                                     int num_levels) {
  if (num_levels < 1) throw std::invalid_argument("build_pyramid: need at least one level");
  const int min_side = std::min(image.height, image.width);
  if (min_side < (1 << (num_levels - 1))) {
    throw std::invalid_argument("build_pyramid: grid too small for " +
                                std::to_string(num_levels) + " levels");
  }
  PyramidFeatures pyr;
  Grid content = image;
  for (int l = 0; l < num_levels; ++l) {
    if (l > 0) content = avg_pool2(content);
    Grid level = Grid::zeros(content.height, content.width, content.channels);
    const std::string name = "pyr." + std::to_string(l);
    Vec cell(static_cast<std::size_t>(content.channels));
    for (int i = 0; i < content.cells(); ++i) {
      const double* src = content.values.data() + static_cast<std::size_t>(i) * content.channels;
      cell.assign(src, src + content.channels);
      const Vec projected = linear_forward(params, name, cell);
      std::copy(projected.begin(), projected.end(),
                level.values.data() + static_cast<std::size_t>(i) * content.channels);
    }
    pyr.levels.push_back(std::move(level));
    pyr.strides.push_back(1 << l);
  }
  return pyr;
}

}  // namespace gvg
