#pragma once

#include <algorithm>
#include <cmath>

namespace gvg {

/// Axis-aligned box in normalized center/size form.
struct BoxCxCyWh {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x0() const { return cx - 0.5 * w; }
  double y0() const { return cy - 0.5 * h; }
  double x1() const { return cx + 0.5 * w; }
  double y1() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  bool contains(double px, double py) const {
    return px >= x0() && px <= x1() && py >= y0() && py <= y1();
  }
};

inline double box_intersection(const BoxCxCyWh& a, const BoxCxCyWh& b) {
  const double ix = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
  const double iy = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
  return ix * iy;
}

inline double box_iou(const BoxCxCyWh& a, const BoxCxCyWh& b) {
  const double inter = box_intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Generalized IoU: IoU - (hull - union)/hull, in [-1, 1].
inline double giou(const BoxCxCyWh& a, const BoxCxCyWh& b) {
  const double inter = box_intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  const double hx = std::max(a.x1(), b.x1()) - std::min(a.x0(), b.x0());
  const double hy = std::max(a.y1(), b.y1()) - std::min(a.y0(), b.y0());
  const double hull = hx * hy;
  const double iou = uni > 0.0 ? inter / uni : 0.0;
  return hull > 0.0 ? iou - (hull - uni) / hull : iou;
}

inline double box_l1(const BoxCxCyWh& a, const BoxCxCyWh& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

}  // namespace gvg
