#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gvg {

/// Binary h x w mask, row-major.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  static BinaryMask zeros(int h, int w) {
    BinaryMask m;
    m.height = h;
    m.width = w;
    m.data.assign(static_cast<std::size_t>(h) * w, 0);
    return m;
  }

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  std::size_t popcount() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += v ? 1 : 0;
    return n;
  }

  bool empty_mask() const { return popcount() == 0; }
};

inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument("mask_or: shape mismatch");
  }
  BinaryMask out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = (a.data[i] || b.data[i]) ? 1 : 0;
  }
  return out;
}

/// Run-length counts starting with the number of leading zeros, row-major.
/// [0, 3, 2] decodes to 1 1 1 0 0 over five cells.
inline std::vector<int> rle_encode(const BinaryMask& m) {
  std::vector<int> counts;
  std::uint8_t current = 0;
  int run = 0;
  for (std::uint8_t v : m.data) {
    const std::uint8_t bit = v ? 1 : 0;
    if (bit == current) {
      ++run;
    } else {
      counts.push_back(run);
      current = bit;
      run = 1;
    }
  }
  counts.push_back(run);
  return counts;
}

inline BinaryMask rle_decode(const std::vector<int>& counts, int h, int w) {
  BinaryMask m = BinaryMask::zeros(h, w);
  std::size_t pos = 0;
  std::uint8_t bit = 0;
  for (int run : counts) {
    if (run < 0 || pos + static_cast<std::size_t>(run) > m.data.size()) {
      throw std::invalid_argument("rle_decode: counts overflow mask");
    }
    for (int i = 0; i < run; ++i) m.data[pos++] = bit;
    bit = bit ? 0 : 1;
  }
  if (pos != m.data.size()) throw std::invalid_argument("rle_decode: counts underflow mask");
  return m;
}

}  // namespace gvg
