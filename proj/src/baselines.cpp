#include "partfit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

// Accumulates one direction of mean squared NN distance. Gradients use that
// the squared distance to the selected neighbor is locally smooth:
// d/dp |p - t*|^2 = 2 (p - t*), and the target-side selection contributes
// 2 (p - t) to every point p selected as someone's neighbor.
double directed_accumulate(const PointSet2D& from, const SpatialIndex& to_index,
                           std::vector<Point2>* grad_from,
                           std::vector<Point2>* grad_to) {
  const double inv_n = 1.0 / static_cast<double>(from.points.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < from.points.size(); ++i) {
    const Point2& p = from.points[i];
    const NearestResult hit = to_index.nearest(p);
    const Point2 diff = p - to_index.points()[hit.index];
    sum += diff.squaredNorm();
    if (grad_from != nullptr) (*grad_from)[i] += 2.0 * inv_n * diff;
    if (grad_to != nullptr) (*grad_to)[hit.index] -= 2.0 * inv_n * diff;
  }
  return sum * inv_n;
}

}  // namespace

PointLoss chamfer_loss(const PointSet2D& pred, const PointSet2D& target) {
  if (pred.points.empty() || target.points.empty()) {
    throw EmptySetError("chamfer_loss: both point sets must be non-empty");
  }
  const SpatialIndex target_index(target);
  const SpatialIndex pred_index(pred);

  PointLoss out;
  out.gradient.assign(pred.points.size(), Point2::Zero());
  out.loss = directed_accumulate(pred, target_index, &out.gradient, nullptr);
  out.loss += directed_accumulate(target, pred_index, nullptr, &out.gradient);
  return out;
}

DirectedNNLoss nn_loss_directed(const PointSet2D& from, const PointSet2D& to) {
  if (from.points.empty() || to.points.empty()) {
    throw EmptySetError("nn_loss_directed: both point sets must be non-empty");
  }
  const SpatialIndex to_index(to);
  DirectedNNLoss out;
  out.grad_from.assign(from.points.size(), Point2::Zero());
  out.grad_to.assign(to.points.size(), Point2::Zero());
  out.loss = directed_accumulate(from, to_index, &out.grad_from, &out.grad_to);
  return out;
}

PointLoss soft_silhouette_iou_loss(const PointSet2D& pred,
                                   const PartMask& target_mask,
                                   const SoftSilhouetteConfig& cfg) {
  if (pred.points.empty()) {
    throw EmptySetError("soft_silhouette_iou_loss: empty predicted set");
  }
  if (target_mask.width < 1 || target_mask.height < 1) {
    throw InvalidArgumentError("soft_silhouette_iou_loss: empty mask grid");
  }
  if (!(cfg.sigma > 0.0) || !(cfg.cutoff_sigmas > 0.0)) {
    throw InvalidArgumentError(
        "soft_silhouette_iou_loss: sigma and cutoff must be positive");
  }

  PointLoss out;
  out.gradient.assign(pred.points.size(), Point2::Zero());

  const long mask_count = target_mask.count();
  if (mask_count == 0) {
    // Nothing to overlap with: the loss saturates at its maximum and the
    // intersection term that would carry gradient is identically zero.
    out.loss = 1.0;
    return out;
  }

  const int w = target_mask.width;
  const int h = target_mask.height;
  const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
  const double radius = cfg.cutoff_sigmas * cfg.sigma;
  // A kernel clamped strictly below 1 keeps the leave-one-out product
  // P / (1 - e_v) finite when a point sits exactly on a pixel center; the
  // same clamped value is used in both passes so value and gradient agree.
  const double kernel_cap = 1.0 - 1e-12;

  // Pass 1: multiplicative scatter of the vacancy product P(q) = prod(1-e).
  std::vector<double> vacancy(static_cast<std::size_t>(w) * h, 1.0);
  const auto splat_bounds = [&](const Point2& v, int* x0, int* x1, int* y0,
                                int* y1) {
    *x0 = std::max(0, static_cast<int>(std::ceil(v.x() - radius)));
    *x1 = std::min(w - 1, static_cast<int>(std::floor(v.x() + radius)));
    *y0 = std::max(0, static_cast<int>(std::ceil(v.y() - radius)));
    *y1 = std::min(h - 1, static_cast<int>(std::floor(v.y() + radius)));
  };
  const double r2 = radius * radius;
  for (const Point2& v : pred.points) {
    int x0, x1, y0, y1;
    splat_bounds(v, &x0, &x1, &y0, &y1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - v.x();
        const double dy = y - v.y();
        const double d2 = dx * dx + dy * dy;
        if (d2 > r2) continue;
        const double e = std::min(std::exp(-d2 * inv_s2), kernel_cap);
        vacancy[static_cast<std::size_t>(y) * w + x] *= 1.0 - e;
      }
    }
  }

  double inter = 0.0;
  double occupancy_sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double o = 1.0 - vacancy[static_cast<std::size_t>(y) * w + x];
      occupancy_sum += o;
      if (target_mask.at(x, y)) inter += o;
    }
  }
  const double uni = occupancy_sum + static_cast<double>(mask_count) - inter;
  out.loss = 1.0 - inter / uni;

  // Pass 2: d(loss)/dv = -(dI * U - I * dU) / U^2 with
  // do(q)/dv = P(q) / (1 - e) * (-2 e (v - q) / s^2) and dU = dO - dI.
  const double inv_u = 1.0 / uni;
  for (std::size_t i = 0; i < pred.points.size(); ++i) {
    const Point2& v = pred.points[i];
    int x0, x1, y0, y1;
    splat_bounds(v, &x0, &x1, &y0, &y1);
    Point2 d_inter = Point2::Zero();
    Point2 d_occ = Point2::Zero();
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Point2 q(static_cast<double>(x), static_cast<double>(y));
        const double d2 = (v - q).squaredNorm();
        if (d2 > r2) continue;
        const double e = std::min(std::exp(-d2 * inv_s2), kernel_cap);
        const double p = vacancy[static_cast<std::size_t>(y) * w + x];
        const Point2 d_o = (p / (1.0 - e)) * (-2.0 * e * inv_s2) * (v - q);
        d_occ += d_o;
        if (target_mask.at(x, y)) d_inter += d_o;
      }
    }
    const Point2 d_uni = d_occ - d_inter;
    out.gradient[i] = -(d_inter * uni - inter * d_uni) * inv_u * inv_u;
  }
  return out;
}

}  // namespace partfit
