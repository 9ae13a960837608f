#pragma once

#include <array>
#include <vector>

namespace setpred {

// Axis-aligned box, corner form. Invariant: x1 <= x2, y1 <= y2, all finite.
struct AABox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const;
};

// Center form (cx, cy, w, h) with w, h > 0; the representation box-regression
// losses operate on.
struct CenterBox {
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

  static CenterBox from_corners(const AABox& b) {
    return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.width(), b.height()};
  }
  AABox to_corners() const {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }
};

double iou(const AABox& a, const AABox& b);
double giou(const AABox& a, const AABox& b);

struct ScalarGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// loss = 1 - GIoU(pred, target); gradient w.r.t. the four center-form
// parameters (cx, cy, w, h) of pred. Caller guarantees w, h > 0.
ScalarGrad giou_loss_grad(const CenterBox& pred, const AABox& target);

// Huber-form smooth L1, summed over coordinates:
// per coordinate 0.5*d^2/delta if |d| < delta else |d| - 0.5*delta.
// Gradient is w.r.t. pred.
ScalarGrad smooth_l1(const std::vector<double>& pred, const std::vector<double>& target,
                     double delta);

}  // namespace setpred
