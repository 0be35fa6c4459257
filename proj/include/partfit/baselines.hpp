#pragma once

#include <vector>

#include "partfit/geometry.hpp"
#include "partfit/ingest.hpp"

namespace partfit {

// Scalar loss with analytic gradients on the predicted points.
struct PointLoss {
  double loss = 0.0;
  std::vector<Point2> gradient;  // aligned with the predicted point order
};

// Mean squared nearest-neighbor distance pred->target plus target->pred.
// The value is symmetric; the gradient is on pred only (targets are data).
PointLoss chamfer_loss(const PointSet2D& pred, const PointSet2D& target);

// Mean squared nearest-neighbor distance in one direction only.
struct DirectedNNLoss {
  double loss = 0.0;
  std::vector<Point2> grad_from;  // aligned with `from`
  std::vector<Point2> grad_to;    // aligned with `to`
};
DirectedNNLoss nn_loss_directed(const PointSet2D& from, const PointSet2D& to);

// Distance-decaying occupancy field: o(q) = 1 - prod_v (1 - exp(-d^2/s^2)).
// Loss is 1 - softIoU(o, mask). Beyond cutoff_sigmas * sigma a point's
// occupancy contribution is dropped (it is far below double rounding noise),
// which keeps evaluation cost proportional to the splat area.
struct SoftSilhouetteConfig {
  double sigma = 1.5;          // pixels
  double cutoff_sigmas = 8.0;  // support radius of one point, in sigmas
};

PointLoss soft_silhouette_iou_loss(const PointSet2D& pred,
                                   const PartMask& target_mask,
                                   const SoftSilhouetteConfig& cfg = {});

}  // namespace partfit
