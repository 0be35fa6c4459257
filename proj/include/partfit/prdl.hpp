#pragma once

#include <Eigen/Core>
#include <initializer_list>
#include <map>
#include <vector>

#include "partfit/geometry.hpp"
#include "partfit/parts.hpp"

namespace partfit {

enum class DistanceFn { min = 0, max = 1, ave = 2 };

// Ordered subset of {min, max, ave}; canonical order is (min, max, ave).
class DistanceFunctionSet {
 public:
  DistanceFunctionSet(std::initializer_list<DistanceFn> fns);
  static DistanceFunctionSet all();

  const std::vector<DistanceFn>& functions() const { return fns_; }
  std::size_t size() const { return fns_.size(); }
  bool contains(DistanceFn f) const;
  // Column of f within this set; -1 when absent.
  int column(DistanceFn f) const;
  bool operator==(const DistanceFunctionSet& other) const {
    return fns_ == other.fns_;
  }

 private:
  std::vector<DistanceFn> fns_;
};

const char* distance_fn_name(DistanceFn f);

// Anchor set; by default the full H x W integer pixel lattice, row-major.
struct AnchorGrid {
  PointSet2D anchors;
  int width = 0;   // generating lattice dims, 0 for custom anchor sets
  int height = 0;

  static AnchorGrid lattice(int width, int height);
  static AnchorGrid from_points(PointSet2D points);

  std::size_t size() const { return anchors.size(); }
};

// FPS-subsampled anchors (selection order, deterministic start).
AnchorGrid subsample_anchors(const AnchorGrid& grid, int k,
                             int start_index = 0);

// Gamma(i, j) = f_j(set, anchor_i): one row per anchor, one column per
// distance function in canonical order.
struct DescriptorTensor {
  Eigen::MatrixXd values;  // |A| x |F|, pixels
  DistanceFunctionSet functions = DistanceFunctionSet::all();

  Eigen::Index anchor_count() const { return values.rows(); }
};

// The mean column is clamped into [min, max] of its row when those columns
// are present, so the row-ordering invariant holds exactly.
DescriptorTensor compute_descriptor(const PointSet2D& set,
                                    const AnchorGrid& anchors,
                                    const DistanceFunctionSet& fns);

using PartWeights = std::map<PartLabel, double>;
PartWeights default_part_weights();  // every part at 1.0

// (1/(H*W)) * sum_p w_p * ||Gamma_p - Gamma*_p||_F^2. Parts with weight
// zero are skipped before any shape checking.
double prdl_loss(const std::map<PartLabel, DescriptorTensor>& pred,
                 const std::map<PartLabel, DescriptorTensor>& target,
                 const PartWeights& weights, int height, int width);

struct PrdlGradient {
  // dE/dv for every predicted point, aligned with the input point order.
  std::map<PartLabel, std::vector<Point2>> point_gradients;
  double loss = 0.0;    // same value prdl_loss would report
  int clamped_pairs = 0;  // selected pairs that hit the 1/d singularity guard
};

// Analytic gradient with argmin/argmax selections treated as constants.
// Per anchor i with target selection distance d_m and predicted selection
// n: dE/dv_n = 2 (v_n - a_i)(1 - d_m/d_n); f_max uses the furthest
// selection; f_ave spreads 2 (f_ave(V) - f_ave(C)) (v_j - a_i)/(|V| d_j)
// over all points. When a selected d < epsilon the 1/d factor is clamped
// to 1/epsilon and counted.
PrdlGradient prdl_gradient(
    const std::map<PartLabel, PointSet2D>& pred_sets,
    const std::map<PartLabel, DescriptorTensor>& target_descriptors,
    const AnchorGrid& anchors, const DistanceFunctionSet& fns,
    const PartWeights& weights, int height, int width,
    double epsilon = 1e-6);

}  // namespace partfit
