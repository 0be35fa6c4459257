#include "partfit/prdl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

// Distances from one anchor to every point of a set, reduced in a single
// index-ordered pass: min/max keep the lowest-index winner on ties.
struct AnchorStats {
  double min_d = std::numeric_limits<double>::infinity();
  double max_d = -std::numeric_limits<double>::infinity();
  double sum_d = 0.0;
  int min_index = -1;
  int max_index = -1;
};

AnchorStats scan_anchor(const PointSet2D& set, const Point2& anchor) {
  AnchorStats s;
  for (std::size_t j = 0; j < set.points.size(); ++j) {
    double dx = set.points[j].x() - anchor.x();
    double dy = set.points[j].y() - anchor.y();
    double d = std::sqrt(dx * dx + dy * dy);
    if (d < s.min_d) {
      s.min_d = d;
      s.min_index = static_cast<int>(j);
    }
    if (d > s.max_d) {
      s.max_d = d;
      s.max_index = static_cast<int>(j);
    }
    s.sum_d += d;
  }
  return s;
}

void check_shape_pair(const DescriptorTensor& a, const DescriptorTensor& b,
                      PartLabel part) {
  if (a.values.rows() != b.values.rows() ||
      !(a.functions == b.functions)) {
    throw InvalidArgumentError(
        std::string("descriptor shape mismatch for part ") +
        std::string(part_name(part)));
  }
}

}  // namespace

DistanceFunctionSet::DistanceFunctionSet(
    std::initializer_list<DistanceFn> fns) {
  bool present[3] = {false, false, false};
  for (DistanceFn f : fns) {
    int slot = static_cast<int>(f);
    if (slot < 0 || slot > 2) {
      throw InvalidArgumentError("unknown distance function");
    }
    if (present[slot]) {
      throw InvalidArgumentError("duplicate distance function");
    }
    present[slot] = true;
  }
  for (DistanceFn f : {DistanceFn::min, DistanceFn::max, DistanceFn::ave}) {
    if (present[static_cast<int>(f)]) fns_.push_back(f);
  }
  if (fns_.empty()) {
    throw InvalidArgumentError("distance function set must be non-empty");
  }
}

DistanceFunctionSet DistanceFunctionSet::all() {
  return {DistanceFn::min, DistanceFn::max, DistanceFn::ave};
}

bool DistanceFunctionSet::contains(DistanceFn f) const {
  return column(f) >= 0;
}

int DistanceFunctionSet::column(DistanceFn f) const {
  for (std::size_t i = 0; i < fns_.size(); ++i) {
    if (fns_[i] == f) return static_cast<int>(i);
  }
  return -1;
}

const char* distance_fn_name(DistanceFn f) {
  switch (f) {
    case DistanceFn::min: return "min";
    case DistanceFn::max: return "max";
    case DistanceFn::ave: return "ave";
  }
  throw InvalidArgumentError("unknown distance function");
}

AnchorGrid AnchorGrid::lattice(int width, int height) {
  if (width < 1 || height < 1) {
    throw InvalidArgumentError("anchor lattice dimensions must be positive");
  }
  AnchorGrid grid;
  grid.width = width;
  grid.height = height;
  grid.anchors.points.reserve(static_cast<std::size_t>(width) *
                              static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      grid.anchors.points.emplace_back(x, y);
    }
  }
  return grid;
}

AnchorGrid AnchorGrid::from_points(PointSet2D points) {
  if (points.empty()) {
    throw EmptySetError("anchor set must be non-empty");
  }
  for (const Point2& p : points.points) {
    if (!p.allFinite()) {
      throw InvalidArgumentError("anchors must be finite");
    }
  }
  AnchorGrid grid;
  grid.anchors = std::move(points);
  return grid;
}

AnchorGrid subsample_anchors(const AnchorGrid& grid, int k,
                             int start_index) {
  if (k < 1 || static_cast<std::size_t>(k) > grid.size()) {
    throw InvalidArgumentError("anchor subsample count out of range");
  }
  if (static_cast<std::size_t>(k) == grid.size()) return grid;
  AnchorGrid out;
  out.anchors = farthest_point_sampling(grid.anchors, k, start_index);
  return out;
}

DescriptorTensor compute_descriptor(const PointSet2D& set,
                                    const AnchorGrid& anchors,
                                    const DistanceFunctionSet& fns) {
  if (set.empty()) {
    throw EmptySetError("cannot build a descriptor of an empty point set");
  }
  if (anchors.size() == 0) {
    throw InvalidArgumentError("anchor grid is empty");
  }
  DescriptorTensor out;
  out.functions = fns;
  out.values.resize(static_cast<Eigen::Index>(anchors.size()),
                    static_cast<Eigen::Index>(fns.size()));
  const int cmin = fns.column(DistanceFn::min);
  const int cmax = fns.column(DistanceFn::max);
  const int cave = fns.column(DistanceFn::ave);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    AnchorStats s = scan_anchor(set, anchors.anchors.points[i]);
    Eigen::Index row = static_cast<Eigen::Index>(i);
    if (cmin >= 0) out.values(row, cmin) = s.min_d;
    if (cmax >= 0) out.values(row, cmax) = s.max_d;
    if (cave >= 0) {
      double ave = s.sum_d / static_cast<double>(set.size());
      if (cmin >= 0) ave = std::max(ave, s.min_d);
      if (cmax >= 0) ave = std::min(ave, s.max_d);
      out.values(row, cave) = ave;
    }
  }
  return out;
}

PartWeights default_part_weights() {
  PartWeights w;
  for (PartLabel part : kAllParts) w[part] = 1.0;
  return w;
}

double prdl_loss(const std::map<PartLabel, DescriptorTensor>& pred,
                 const std::map<PartLabel, DescriptorTensor>& target,
                 const PartWeights& weights, int height, int width) {
  if (height < 1 || width < 1) {
    throw InvalidArgumentError("normalization dimensions must be positive");
  }
  double total = 0.0;
  for (const auto& [part, gamma_target] : target) {
    auto wit = weights.find(part);
    double w = wit == weights.end() ? 1.0 : wit->second;
    if (w < 0.0) {
      throw InvalidArgumentError("part weights must be non-negative");
    }
    if (w == 0.0) continue;
    auto pit = pred.find(part);
    if (pit == pred.end()) {
      throw InvalidArgumentError(
          std::string("missing predicted descriptor for part ") +
          std::string(part_name(part)));
    }
    check_shape_pair(pit->second, gamma_target, part);
    total += w * (pit->second.values - gamma_target.values).squaredNorm();
  }
  return total / (static_cast<double>(height) * static_cast<double>(width));
}

PrdlGradient prdl_gradient(
    const std::map<PartLabel, PointSet2D>& pred_sets,
    const std::map<PartLabel, DescriptorTensor>& target_descriptors,
    const AnchorGrid& anchors, const DistanceFunctionSet& fns,
    const PartWeights& weights, int height, int width, double epsilon) {
  if (height < 1 || width < 1) {
    throw InvalidArgumentError("normalization dimensions must be positive");
  }
  if (epsilon <= 0.0) {
    throw InvalidArgumentError("singularity epsilon must be positive");
  }
  const double norm = 1.0 /
      (static_cast<double>(height) * static_cast<double>(width));
  PrdlGradient out;
  for (const auto& [part, gamma_target] : target_descriptors) {
    auto wit = weights.find(part);
    double w = wit == weights.end() ? 1.0 : wit->second;
    if (w < 0.0) {
      throw InvalidArgumentError("part weights must be non-negative");
    }
    if (w == 0.0) continue;
    auto pit = pred_sets.find(part);
    if (pit == pred_sets.end()) {
      throw InvalidArgumentError(
          std::string("missing predicted point set for part ") +
          std::string(part_name(part)));
    }
    const PointSet2D& v = pit->second;
    if (v.empty()) {
      throw EmptySetError(std::string("predicted part ") + std::string(part_name(part)) +
                          " is empty; set its weight to zero to skip it");
    }
    if (gamma_target.values.rows() !=
            static_cast<Eigen::Index>(anchors.size()) ||
        !(gamma_target.functions == fns)) {
      throw InvalidArgumentError(
          std::string("target descriptor shape mismatch for part ") +
          std::string(part_name(part)));
    }
    const double scale = w * norm;
    const int cmin = fns.column(DistanceFn::min);
    const int cmax = fns.column(DistanceFn::max);
    const int cave = fns.column(DistanceFn::ave);
    std::vector<Point2>& grad = out.point_gradients[part];
    grad.assign(v.size(), Point2::Zero());

    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const Point2& a = anchors.anchors.points[i];
      const Eigen::Index row = static_cast<Eigen::Index>(i);
      AnchorStats s = scan_anchor(v, a);

      if (cmin >= 0) {
        double dm = gamma_target.values(row, cmin);
        double dn = s.min_d;
        out.loss += scale * (dn - dm) * (dn - dm);
        double inv = 1.0 / dn;
        if (dn < epsilon) {
          inv = 1.0 / epsilon;
          ++out.clamped_pairs;
        }
        Point2 dir = v.points[static_cast<std::size_t>(s.min_index)] - a;
        grad[static_cast<std::size_t>(s.min_index)] +=
            scale * 2.0 * (dn - dm) * inv * dir;
      }
      if (cmax >= 0) {
        double dm = gamma_target.values(row, cmax);
        double dn = s.max_d;
        out.loss += scale * (dn - dm) * (dn - dm);
        double inv = 1.0 / dn;
        if (dn < epsilon) {
          inv = 1.0 / epsilon;
          ++out.clamped_pairs;
        }
        Point2 dir = v.points[static_cast<std::size_t>(s.max_index)] - a;
        grad[static_cast<std::size_t>(s.max_index)] +=
            scale * 2.0 * (dn - dm) * inv * dir;
      }
      if (cave >= 0) {
        const double count = static_cast<double>(v.size());
        double fv = s.sum_d / count;
        if (cmin >= 0) fv = std::max(fv, s.min_d);
        if (cmax >= 0) fv = std::min(fv, s.max_d);
        double fc = gamma_target.values(row, cave);
        out.loss += scale * (fv - fc) * (fv - fc);
        double lead = scale * 2.0 * (fv - fc) / count;
        for (std::size_t j = 0; j < v.points.size(); ++j) {
          Point2 dir = v.points[j] - a;
          double d = dir.norm();
          double inv = 1.0 / d;
          if (d < epsilon) {
            inv = 1.0 / epsilon;
            ++out.clamped_pairs;
          }
          grad[j] += lead * inv * dir;
        }
      }
    }
  }
  return out;
}

}  // namespace partfit
