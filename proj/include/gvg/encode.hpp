#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "gvg/grid.hpp"
#include "gvg/params.hpp"
#include "gvg/scene.hpp"

namespace gvg {

inline void register_encoder_params(ParamStore& params, int channels) {
  params.matrix("enc.token_embed", kVocabSize, channels);
  params.matrix("enc.attr_embed", kVocabSize, channels);
  params.matrix("enc.kind_embed", 2, channels);
  params.vector("enc.background", channels);
}

/// 2-D sinusoidal positional encoding; first half of the channels encodes x,
/// second half y, alternating sin/cos at doubling frequencies.
inline void add_positional_encoding(double* cell, int channels, double x, double y) {
  const int half = channels / 2;
  for (int c = 0; c < channels; ++c) {
    const bool x_axis = c < half;
    const int local = x_axis ? c : c - half;
    const double freq = std::pow(2.0, local / 2) * 3.14159265358979323846;
    const double arg = (x_axis ? x : y) * freq;
    cell[c] += (local % 2 == 0) ? std::sin(arg) : std::cos(arg);
  }
}

/// Deterministic stand-in for the multi-modality encoder. Image features are
/// attribute/kind embeddings summed per covered cell plus positional
/// encoding; text features are token-table rows with a padding mask.
inline std::pair<Grid, TextSequence> encode(const Scene& scene, const ParamStore& params,
                                            int channels, int text_len) {
  const Tensor& token_embed = params.require("enc.token_embed");
  const Tensor& attr_embed = params.require("enc.attr_embed");
  const Tensor& kind_embed = params.require("enc.kind_embed");
  const Tensor& background = params.require("enc.background");

  Grid image = Grid::zeros(scene.grid_h, scene.grid_w, channels);
  std::vector<BinaryMask> coverage;
  coverage.reserve(scene.instances.size());
  for (const SceneInstance& inst : scene.instances) {
    coverage.push_back(rasterize_instance(inst, scene.grid_h, scene.grid_w));
  }
  for (int y = 0; y < scene.grid_h; ++y) {
    for (int x = 0; x < scene.grid_w; ++x) {
      double* cell = image.cell(y, x);
      bool covered = false;
      for (std::size_t i = 0; i < scene.instances.size(); ++i) {
        if (!coverage[i].at(y, x)) continue;
        covered = true;
        const SceneInstance& inst = scene.instances[i];
        for (int attr : inst.attributes) {
          const double* row = attr_embed.data.data() + static_cast<std::size_t>(attr) * channels;
          for (int c = 0; c < channels; ++c) cell[c] += row[c];
        }
        const double* kind =
            kind_embed.data.data() + static_cast<std::size_t>(inst.kind) * channels;
        for (int c = 0; c < channels; ++c) cell[c] += kind[c];
      }
      if (!covered) {
        for (int c = 0; c < channels; ++c) cell[c] += background.data[static_cast<std::size_t>(c)];
      }
      add_positional_encoding(cell, channels,
                              scene.grid_w > 1 ? static_cast<double>(x) / (scene.grid_w - 1) : 0.0,
                              scene.grid_h > 1 ? static_cast<double>(y) / (scene.grid_h - 1) : 0.0);
    }
  }

  if (static_cast<int>(scene.expression.size()) > text_len) {
    throw std::invalid_argument("encode: expression longer than text length");
  }
  TextSequence text = TextSequence::zeros(text_len, channels);
  for (std::size_t i = 0; i < scene.expression.size(); ++i) {
    const int tok = scene.expression[i];
    if (tok < 0 || tok >= kVocabSize) {
      throw std::invalid_argument("encode: unknown token id " + std::to_string(tok));
    }
    const double* row = token_embed.data.data() + static_cast<std::size_t>(tok) * channels;
    std::copy(row, row + channels, text.row(static_cast<int>(i)));
    text.valid[i] = 1;
  }
  return {std::move(image), std::move(text)};
}

}  // namespace gvg
