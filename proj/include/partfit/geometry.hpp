#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <vector>

#include "partfit/parts.hpp"

namespace partfit {

using Point2 = Eigen::Vector2d;

// Ordered list of 2D pixel-coordinate points. x is the column, y the row
// (y grows downward). May be empty: empty sets signal invisible parts.
// Carries its part label when it represents a C_p or V_2d^p set.
struct PointSet2D {
  std::vector<Point2> points;
  std::optional<PartLabel> label;

  PointSet2D() = default;
  explicit PointSet2D(std::vector<Point2> pts,
                      std::optional<PartLabel> lbl = std::nullopt)
      : points(std::move(pts)), label(lbl) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct NearestResult {
  double distance = 0.0;
  int index = -1;
};

// Immutable nearest/furthest-neighbor structure over one point set: a 2D
// KD-tree for nearest queries plus the cached point list for linear scans.
// All queries break distance ties toward the lowest point index and agree
// with a brute-force scan over the indexed set.
class SpatialIndex {
 public:
  // Throws EmptySetError on an empty set.
  explicit SpatialIndex(PointSet2D set);

  NearestResult nearest(const Point2& q) const;
  NearestResult furthest(const Point2& q) const;
  double mean_distance(const Point2& q) const;

  const std::vector<Point2>& points() const { return set_.points; }
  std::size_t size() const { return set_.points.size(); }

 private:
  struct Node {
    int point = -1;   // index into set_.points
    int axis = 0;     // 0 = x, 1 = y
    int left = -1;    // child node ids, -1 = none
    int right = -1;
  };

  int build(std::vector<int>& order, int lo, int hi, int depth);
  void search(int node, const Point2& q, NearestResult& best) const;

  PointSet2D set_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

inline SpatialIndex build_index(PointSet2D set) {
  return SpatialIndex(std::move(set));
}

// Brute-force counterparts operating directly on a set. These define the
// reference semantics the index must reproduce; they also serve callers
// that query a set only once.
NearestResult nearest_distance(const PointSet2D& set, const Point2& q);
NearestResult furthest_distance(const PointSet2D& set, const Point2& q);
double mean_distance(const PointSet2D& set, const Point2& q);

// Greedy farthest point sampling. The first selection is set[start_index];
// each following selection maximizes the minimum distance to everything
// already selected, with ties broken toward the lowest candidate index.
// Returns selected indices in selection order. Throws InvalidArgument when
// k or start_index is out of range, EmptySetError on an empty set.
std::vector<int> farthest_point_sampling_indices(const PointSet2D& set, int k,
                                                 int start_index);

// Same sampling, returning the selected points (selection order, label kept).
PointSet2D farthest_point_sampling(const PointSet2D& set, int k,
                                   int start_index);

}  // namespace partfit
