#pragma once

#include <Eigen/Core>
#include <array>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "partfit/geometry.hpp"
#include "partfit/ingest.hpp"
#include "partfit/parts.hpp"

namespace partfit {

// Linear blendshape model: mean shape plus identity and expression bases,
// with per-part vertex annotation and landmark correspondences.
struct BlendshapeModel {
  Eigen::Matrix3Xd mean_shape;        // 3 x n, model units
  Eigen::MatrixXd identity_basis;     // 3n x k_id, vertex-major rows (x,y,z per vertex)
  Eigen::MatrixXd expression_basis;   // 3n x k_exp
  std::map<PartLabel, std::vector<int>> part_annotation;  // sorted, disjoint
  std::vector<int> landmark_indices;

  int vertex_count() const { return static_cast<int>(mean_shape.cols()); }
  int id_dims() const { return static_cast<int>(identity_basis.cols()); }
  int exp_dims() const { return static_cast<int>(expression_basis.cols()); }

  const std::vector<int>& part_indices(PartLabel p) const;

  // Enforces the structural invariants (index ranges, disjoint parts, basis
  // row counts). Throws InvalidArgumentError on violation.
  void validate() const;
};

// Parameter vector alpha = (alpha_id, alpha_exp, alpha_a, alpha_t).
// Angles are (pitch, yaw, roll) in radians; translation is in model units.
struct ShapeParams {
  Eigen::VectorXd id;
  Eigen::VectorXd exp;
  Eigen::Vector3d angles = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static ShapeParams zero(const BlendshapeModel& model);

  int dim() const { return static_cast<int>(id.size() + exp.size()) + 6; }

  // Flat layout: [id; exp; angles; translation].
  Eigen::VectorXd flatten() const;
  static ShapeParams unflatten(const BlendshapeModel& model,
                               const Eigen::VectorXd& v);
};

struct Camera {
  enum class Mode { orthographic, weak_perspective };
  Mode mode = Mode::orthographic;
  double scale = 48.0;  // pixels per model unit (orthographic)
  double cx = 64.0;
  double cy = 64.0;
  double focal = 480.0;   // weak-perspective only
  double z_offset = 10.0; // weak-perspective depth offset z_0
};

// R = R_z(roll) * R_y(yaw) * R_x(pitch).
Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& angles);

// dR/dpitch, dR/dyaw, dR/droll in that order.
std::array<Eigen::Matrix3d, 3> rotation_matrix_derivatives(
    const Eigen::Vector3d& angles);

// V_3d(alpha) = R(alpha_a) (mean + A_id alpha_id + A_exp alpha_exp) + alpha_t
Eigen::Matrix3Xd assemble_vertices(const BlendshapeModel& model,
                                   const ShapeParams& params);

// Projects 3D vertices to pixel coordinates. Orthographic:
// (x,y,z) -> (s*x + cx, -s*y + cy); weak-perspective substitutes the scale
// with focal/(z + z_offset) per vertex and requires positive depth.
Eigen::Matrix2Xd project_matrix(const Camera& camera,
                                const Eigen::Matrix3Xd& vertices);
PointSet2D project(const Camera& camera, const Eigen::Matrix3Xd& vertices);

// Analytic Jacobian of the flattened projection (rows: x0,y0,x1,y1,...)
// with respect to the flat parameter vector (cols: id, exp, angles,
// translation). Size 2n x dim(alpha).
Eigen::MatrixXd parameter_jacobian(const BlendshapeModel& model,
                                   const Camera& camera,
                                   const ShapeParams& params);

// Prediction-side filters applied to projected part points.
struct ProjectionFilters {
  // A vertex is visible when its post-rotation z is at least the part
  // median z minus this slack (model units). Quasi-planar toys pass whole.
  double visibility_slack = 0.5;
  // Drop projected skin points above the target eyebrow line (mirrors the
  // target-side forehead exclusion).
  bool eyebrow_cut = true;
  // Drop points farther than this from every target point (hair-occlusion
  // analog). <= 0 disables.
  double occlusion_radius = 3.0;
};

// Target-derived context for the filters above. Built once per fit.
struct TargetContext {
  std::optional<double> eyebrow_min_y;
  std::shared_ptr<const SpatialIndex> target_union;

  static TargetContext from_targets(const PartPointSets& targets);
};

// Projected points of one part with their originating vertex indices
// (needed to scatter point gradients back into the parameter Jacobian).
struct IndexedPoints {
  std::vector<Point2> points;
  std::vector<int> vertex_ids;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  PointSet2D to_set(std::optional<PartLabel> label) const;
};

IndexedPoints part_points_indexed(const BlendshapeModel& model,
                                  const Camera& camera,
                                  const ShapeParams& params, PartLabel part,
                                  const ProjectionFilters& filters = {},
                                  const TargetContext* target_ctx = nullptr);

// V_2d^p: the projected, filtered point set of one part.
PointSet2D part_points(const BlendshapeModel& model, const Camera& camera,
                       const ShapeParams& params, PartLabel part,
                       const ProjectionFilters& filters = {},
                       const TargetContext* target_ctx = nullptr);

// Transfers 2D part annotations onto model vertices: every target point
// votes for its k nearest visible projected vertices; a vertex joins the
// part with the most votes (ties to the lowest part code). Vertices whose
// visibility entry is false are never assigned. `visibility` may be empty,
// in which case the global-median z rule with `visibility_slack` applies.
std::map<PartLabel, std::vector<int>> annotate_parts(
    const BlendshapeModel& model, const Camera& camera,
    const ShapeParams& neutral_params, const PartPointSets& targets, int k,
    const std::vector<char>& visibility = {}, double visibility_slack = 0.5);

}  // namespace partfit
