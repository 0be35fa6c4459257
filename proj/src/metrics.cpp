#include "partfit/metrics.hpp"

#include <cmath>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

// One 3x3 dilation. Out-of-bounds neighbors contribute nothing.
PartMask dilate3(const PartMask& in) {
  PartMask out = PartMask::zeros(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      if (!in.at(x, y)) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (in.in_bounds(x + dx, y + dy)) out.set(x + dx, y + dy, true);
        }
      }
    }
  }
  return out;
}

// One 3x3 erosion with out-of-bounds neighbors treated as set, so shapes
// touching the border survive intact.
PartMask erode3(const PartMask& in) {
  PartMask out = PartMask::zeros(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      bool keep = true;
      for (int dy = -1; dy <= 1 && keep; ++dy) {
        for (int dx = -1; dx <= 1 && keep; ++dx) {
          if (in.in_bounds(x + dx, y + dy) && !in.at(x + dx, y + dy)) {
            keep = false;
          }
        }
      }
      out.set(x, y, keep);
    }
  }
  return out;
}

}  // namespace

PartMask rasterize_points(const PointSet2D& set, int height, int width,
                          int radius) {
  if (height < 1 || width < 1) {
    throw InvalidArgumentError("rasterize_points: image size must be positive");
  }
  if (radius < 0) {
    throw InvalidArgumentError("rasterize_points: radius must be non-negative");
  }
  PartMask mask = PartMask::zeros(width, height);
  if (set.points.empty()) return mask;

  const double r2 = static_cast<double>(radius) * radius;
  for (const Point2& p : set.points) {
    const int cx = static_cast<int>(std::lround(p.x()));
    const int cy = static_cast<int>(std::lround(p.y()));
    if (mask.in_bounds(cx, cy)) mask.set(cx, cy, true);
    if (radius == 0) continue;
    const int x0 = static_cast<int>(std::ceil(p.x() - radius));
    const int x1 = static_cast<int>(std::floor(p.x() + radius));
    const int y0 = static_cast<int>(std::ceil(p.y() - radius));
    const int y1 = static_cast<int>(std::floor(p.y() + radius));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!mask.in_bounds(x, y)) continue;
        const double dx = x - p.x();
        const double dy = y - p.y();
        if (dx * dx + dy * dy <= r2) mask.set(x, y, true);
      }
    }
  }
  return erode3(dilate3(mask));
}

double part_iou(const PartMask& pred, const PartMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw InvalidArgumentError("part_iou: mask dimensions differ");
  }
  long inter = 0;
  long uni = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    const bool a = pred.bits[i] != 0;
    const bool b = gt.bits[i] != 0;
    inter += a && b;
    uni += a || b;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

IoUReport part_iou_report(const BlendshapeModel& model, const Camera& camera,
                          const ShapeParams& params,
                          const std::map<PartLabel, PartMask>& gt_masks,
                          int splat_radius, const ProjectionFilters& filters,
                          const TargetContext* target_ctx) {
  IoUReport report;
  double sum = 0.0;
  int counted = 0;
  for (const auto& [part, gt] : gt_masks) {
    report.width = gt.width;
    report.height = gt.height;
    const PointSet2D pred_points =
        part_points(model, camera, params, part, filters, target_ctx);
    const PartMask pred =
        rasterize_points(pred_points, gt.height, gt.width, splat_radius);
    const double iou = part_iou(pred, gt);
    report.per_part[part] = iou;
    if (gt.count() > 0) {
      sum += iou;
      ++counted;
    }
  }
  report.mean_iou = counted > 0 ? sum / counted : 1.0;
  return report;
}

}  // namespace partfit
