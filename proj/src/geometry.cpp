#include "partfit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

double sq_dist(const Point2& a, const Point2& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  return dx * dx + dy * dy;
}

// Shared tie rule: a candidate replaces the incumbent only on strictly
// smaller (greater) squared distance, or on exact equality with a lower
// index. Both the brute-force scans and the KD-tree use this comparison so
// they select identical winners.
void consider_nearest(double d2, int idx, double& best_d2, int& best_idx) {
  if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
    best_d2 = d2;
    best_idx = idx;
  }
}

void consider_furthest(double d2, int idx, double& best_d2, int& best_idx) {
  if (d2 > best_d2 || (d2 == best_d2 && idx < best_idx)) {
    best_d2 = d2;
    best_idx = idx;
  }
}

}  // namespace

NearestResult nearest_distance(const PointSet2D& set, const Point2& q) {
  if (set.empty()) throw EmptySetError("nearest_distance: empty point set");
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_idx = std::numeric_limits<int>::max();
  for (int i = 0; i < static_cast<int>(set.points.size()); ++i) {
    consider_nearest(sq_dist(set.points[i], q), i, best_d2, best_idx);
  }
  return {std::sqrt(best_d2), best_idx};
}

NearestResult furthest_distance(const PointSet2D& set, const Point2& q) {
  if (set.empty()) throw EmptySetError("furthest_distance: empty point set");
  double best_d2 = -1.0;
  int best_idx = std::numeric_limits<int>::max();
  for (int i = 0; i < static_cast<int>(set.points.size()); ++i) {
    consider_furthest(sq_dist(set.points[i], q), i, best_d2, best_idx);
  }
  return {std::sqrt(best_d2), best_idx};
}

double mean_distance(const PointSet2D& set, const Point2& q) {
  if (set.empty()) throw EmptySetError("mean_distance: empty point set");
  double sum = 0.0;
  for (const Point2& p : set.points) sum += std::sqrt(sq_dist(p, q));
  return sum / static_cast<double>(set.points.size());
}

SpatialIndex::SpatialIndex(PointSet2D set) : set_(std::move(set)) {
  if (set_.empty()) throw EmptySetError("build_index: empty point set");
  std::vector<int> order(set_.points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  nodes_.reserve(order.size());
  root_ = build(order, 0, static_cast<int>(order.size()), 0);
}

int SpatialIndex::build(std::vector<int>& order, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 2;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                   [&](int a, int b) {
                     const double ca = set_.points[a][axis];
                     const double cb = set_.points[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  Node node;
  node.point = order[mid];
  node.axis = axis;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  nodes_[id].left = build(order, lo, mid, depth + 1);
  nodes_[id].right = build(order, mid + 1, hi, depth + 1);
  return id;
}

void SpatialIndex::search(int node_id, const Point2& q,
                          NearestResult& best) const {
  if (node_id < 0) return;
  const Node& node = nodes_[node_id];
  const Point2& p = set_.points[node.point];
  // `best.distance` holds a squared distance during the recursion.
  double best_d2 = best.distance;
  int best_idx = best.index;
  consider_nearest(sq_dist(p, q), node.point, best_d2, best_idx);
  best.distance = best_d2;
  best.index = best_idx;

  const double delta = q[node.axis] - p[node.axis];
  const int near_child = delta < 0 ? node.left : node.right;
  const int far_child = delta < 0 ? node.right : node.left;
  search(near_child, q, best);
  // Only prune when the splitting plane is strictly farther than the best
  // candidate; equal-distance subtrees may still hold a lower tie index.
  if (delta * delta <= best.distance) search(far_child, q, best);
}

NearestResult SpatialIndex::nearest(const Point2& q) const {
  NearestResult best{std::numeric_limits<double>::infinity(),
                     std::numeric_limits<int>::max()};
  search(root_, q, best);
  best.distance = std::sqrt(best.distance);
  return best;
}

NearestResult SpatialIndex::furthest(const Point2& q) const {
  return furthest_distance(set_, q);
}

double SpatialIndex::mean_distance(const Point2& q) const {
  return partfit::mean_distance(set_, q);
}

std::vector<int> farthest_point_sampling_indices(const PointSet2D& set, int k,
                                                 int start_index) {
  const int n = static_cast<int>(set.points.size());
  if (n == 0) throw EmptySetError("farthest_point_sampling: empty point set");
  if (k < 1 || k > n) {
    throw InvalidArgumentError("farthest_point_sampling: k out of range");
  }
  if (start_index < 0 || start_index >= n) {
    throw InvalidArgumentError(
        "farthest_point_sampling: start_index out of range");
  }

  std::vector<int> selected;
  selected.reserve(k);
  selected.push_back(start_index);

  // min_d2[i] = squared distance from point i to the current selection.
  std::vector<double> min_d2(n);
  std::vector<char> taken(n, 0);
  taken[start_index] = 1;
  for (int i = 0; i < n; ++i) {
    min_d2[i] = sq_dist(set.points[i], set.points[start_index]);
  }

  for (int step = 1; step < k; ++step) {
    double best_d2 = -1.0;
    int best_idx = -1;
    for (int i = 0; i < n; ++i) {
      // Skip already-selected indices so duplicate coordinates never make
      // the same index win twice; strict > keeps the lowest index on ties.
      if (!taken[i] && min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best_idx = i;
      }
    }
    selected.push_back(best_idx);
    taken[best_idx] = 1;
    for (int i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], sq_dist(set.points[i], set.points[best_idx]));
    }
  }
  return selected;
}

PointSet2D farthest_point_sampling(const PointSet2D& set, int k,
                                   int start_index) {
  const std::vector<int> idx = farthest_point_sampling_indices(set, k, start_index);
  PointSet2D out;
  out.label = set.label;
  out.points.reserve(idx.size());
  for (int i : idx) out.points.push_back(set.points[i]);
  return out;
}

}  // namespace partfit
