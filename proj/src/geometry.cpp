#include "setpred/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace setpred {

bool AABox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 <= x2 && y1 <= y2;
}

double iou(const AABox& a, const AABox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double giou(const AABox& a, const AABox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double hull = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) *
                      (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  if (uni <= 0.0 || hull <= 0.0) return 0.0;
  return inter / uni - (hull - uni) / hull;
}

ScalarGrad giou_loss_grad(const CenterBox& pred, const AABox& target) {
  if (!(pred.w > 0.0) || !(pred.h > 0.0))
    throw std::invalid_argument("giou_loss_grad: pred width/height must be positive");
  if (!target.valid()) throw std::invalid_argument("giou_loss_grad: invalid target box");

  const double p1x = pred.cx - 0.5 * pred.w, p1y = pred.cy - 0.5 * pred.h;
  const double p2x = pred.cx + 0.5 * pred.w, p2y = pred.cy + 0.5 * pred.h;
  const double t1x = target.x1, t1y = target.y1, t2x = target.x2, t2y = target.y2;

  const double iw = std::max(0.0, std::min(p2x, t2x) - std::max(p1x, t1x));
  const double ih = std::max(0.0, std::min(p2y, t2y) - std::max(p1y, t1y));
  const double inter = iw * ih;
  const double wp = p2x - p1x, hp = p2y - p1y;
  const double uni = wp * hp + target.area() - inter;
  const double hw = std::max(p2x, t2x) - std::min(p1x, t1x);
  const double hh = std::max(p2y, t2y) - std::min(p1y, t1y);
  const double hull = hw * hh;

  // Partial derivatives over the pred corners, tracking the active branch of
  // each min/max. Derivatives at exact branch boundaries take one side; the
  // function is continuous there.
  const bool ix_pos = iw > 0.0 && ih > 0.0;
  const double di_p1x = (ix_pos && p1x > t1x) ? -ih : 0.0;
  const double di_p2x = (ix_pos && p2x < t2x) ? ih : 0.0;
  const double di_p1y = (ix_pos && p1y > t1y) ? -iw : 0.0;
  const double di_p2y = (ix_pos && p2y < t2y) ? iw : 0.0;

  const double da_p1x = -hp, da_p2x = hp, da_p1y = -wp, da_p2y = wp;

  const double dh_p1x = (p1x < t1x) ? -hh : 0.0;
  const double dh_p2x = (p2x > t2x) ? hh : 0.0;
  const double dh_p1y = (p1y < t1y) ? -hw : 0.0;
  const double dh_p2y = (p2y > t2y) ? hw : 0.0;

  const double iou_v = inter / uni;
  const double giou_v = iou_v - (hull - uni) / hull;

  std::array<double, 4> dcorner{};  // order: p1x, p1y, p2x, p2y
  const double di[4] = {di_p1x, di_p1y, di_p2x, di_p2y};
  const double da[4] = {da_p1x, da_p1y, da_p2x, da_p2y};
  const double dh[4] = {dh_p1x, dh_p1y, dh_p2x, dh_p2y};
  for (int k = 0; k < 4; ++k) {
    const double du = da[k] - di[k];
    const double diou = (di[k] * uni - inter * du) / (uni * uni);
    const double dpen = -(du * hull - uni * dh[k]) / (hull * hull);
    dcorner[static_cast<std::size_t>(k)] = -(diou - dpen);  // d(1 - giou)
  }

  ScalarGrad out;
  out.value = 1.0 - giou_v;
  out.grad = {dcorner[0] + dcorner[2], dcorner[1] + dcorner[3],
              0.5 * (dcorner[2] - dcorner[0]), 0.5 * (dcorner[3] - dcorner[1])};
  return out;
}

ScalarGrad smooth_l1(const std::vector<double>& pred, const std::vector<double>& target,
                     double delta) {
  if (pred.size() != target.size())
    throw std::invalid_argument("smooth_l1: length mismatch");
  if (!(delta > 0.0)) throw std::invalid_argument("smooth_l1: delta must be positive");
  ScalarGrad out;
  out.grad.assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    if (std::fabs(d) < delta) {
      out.value += 0.5 * d * d / delta;
      out.grad[i] = d / delta;
    } else {
      out.value += std::fabs(d) - 0.5 * delta;
      out.grad[i] = (d > 0.0) ? 1.0 : -1.0;
    }
  }
  return out;
}

}  // namespace setpred
