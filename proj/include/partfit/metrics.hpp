#pragma once

#include <map>

#include "partfit/ingest.hpp"
#include "partfit/shape_model.hpp"

namespace partfit {

// Splats every point as a filled disc (pixels within `radius` of the true
// coordinates, plus the rounded center pixel), then applies one 3x3
// morphological closing to seal sub-pixel gaps. Everything is clipped to
// the image bounds; erosion treats out-of-bounds neighbors as set so the
// border is not eaten. Empty input yields an all-zero mask.
PartMask rasterize_points(const PointSet2D& set, int height, int width,
                          int radius);

// |intersection| / |union| of two same-sized masks; two empty masks agree
// perfectly (1.0). Dimension mismatch throws InvalidArgumentError.
double part_iou(const PartMask& pred, const PartMask& gt);

struct IoUReport {
  std::map<PartLabel, double> per_part;
  // Arithmetic mean over parts with non-empty ground truth; 1.0 when every
  // ground-truth mask is empty (agreement on absence).
  double mean_iou = 1.0;
  int width = 0;
  int height = 0;
};

// Rasterizes the model's projected parts at `params` and scores them
// against the ground-truth masks. Parts without a ground-truth entry are
// skipped; parts with an empty ground truth score 1 on an empty prediction
// and 0 otherwise, and are excluded from the mean.
IoUReport part_iou_report(const BlendshapeModel& model, const Camera& camera,
                          const ShapeParams& params,
                          const std::map<PartLabel, PartMask>& gt_masks,
                          int splat_radius = 1,
                          const ProjectionFilters& filters = {},
                          const TargetContext* target_ctx = nullptr);

}  // namespace partfit
