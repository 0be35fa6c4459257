#include "partfit/shape_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

const std::vector<int> kNoIndices;

// Median of the z row restricted to `indices` (all columns when empty).
double median_z(const Eigen::Matrix3Xd& vertices,
                const std::vector<int>& indices) {
  std::vector<double> zs;
  if (indices.empty()) {
    zs.assign(vertices.row(2).data(),
              vertices.row(2).data() + vertices.cols());
  } else {
    zs.reserve(indices.size());
    for (int i : indices) zs.push_back(vertices(2, i));
  }
  if (zs.empty()) throw EmptySetError("median of empty vertex set");
  std::size_t mid = zs.size() / 2;
  std::nth_element(zs.begin(), zs.begin() + mid, zs.end());
  double hi = zs[mid];
  if (zs.size() % 2 == 1) return hi;
  double lo = *std::max_element(zs.begin(), zs.begin() + mid);
  return 0.5 * (lo + hi);
}

// Per-vertex projection scale and the 2x3 projection derivative block.
struct ProjectedVertex {
  double u, v;
  Eigen::Matrix<double, 2, 3> d;  // d(u,v)/d(X,Y,Z)
};

ProjectedVertex project_vertex(const Camera& camera, double X, double Y,
                               double Z) {
  ProjectedVertex out;
  out.d.setZero();
  if (camera.mode == Camera::Mode::orthographic) {
    out.u = camera.scale * X + camera.cx;
    out.v = -camera.scale * Y + camera.cy;
    out.d(0, 0) = camera.scale;
    out.d(1, 1) = -camera.scale;
  } else {
    double depth = Z + camera.z_offset;
    if (!(depth > 0.0)) {
      throw ProjectionError("vertex depth " + std::to_string(depth) +
                            " is not positive under weak perspective");
    }
    double s = camera.focal / depth;
    out.u = s * X + camera.cx;
    out.v = -s * Y + camera.cy;
    out.d(0, 0) = s;
    out.d(1, 1) = -s;
    out.d(0, 2) = -camera.focal * X / (depth * depth);
    out.d(1, 2) = camera.focal * Y / (depth * depth);
  }
  return out;
}

}  // namespace

const std::vector<int>& BlendshapeModel::part_indices(PartLabel p) const {
  auto it = part_annotation.find(p);
  return it == part_annotation.end() ? kNoIndices : it->second;
}

void BlendshapeModel::validate() const {
  const int n = vertex_count();
  if (n < 1) throw InvalidArgumentError("model must have at least one vertex");
  if (identity_basis.rows() != 3 * n || expression_basis.rows() != 3 * n) {
    throw InvalidArgumentError("basis row count must equal 3 * vertex count");
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto& [part, indices] : part_annotation) {
    (void)part;
    for (int i : indices) {
      if (i < 0 || i >= n) {
        throw InvalidArgumentError("part annotation index out of range: " +
                                   std::to_string(i));
      }
      if (seen[static_cast<std::size_t>(i)]) {
        throw InvalidArgumentError("vertex " + std::to_string(i) +
                                   " appears in more than one part");
      }
      seen[static_cast<std::size_t>(i)] = 1;
    }
    if (!std::is_sorted(indices.begin(), indices.end())) {
      throw InvalidArgumentError("part annotation indices must be sorted");
    }
  }
  for (int i : landmark_indices) {
    if (i < 0 || i >= n) {
      throw InvalidArgumentError("landmark index out of range: " +
                                 std::to_string(i));
    }
  }
}

ShapeParams ShapeParams::zero(const BlendshapeModel& model) {
  ShapeParams p;
  p.id = Eigen::VectorXd::Zero(model.id_dims());
  p.exp = Eigen::VectorXd::Zero(model.exp_dims());
  return p;
}

Eigen::VectorXd ShapeParams::flatten() const {
  Eigen::VectorXd v(dim());
  v.segment(0, id.size()) = id;
  v.segment(id.size(), exp.size()) = exp;
  v.segment(id.size() + exp.size(), 3) = angles;
  v.segment(id.size() + exp.size() + 3, 3) = translation;
  return v;
}

ShapeParams ShapeParams::unflatten(const BlendshapeModel& model,
                                   const Eigen::VectorXd& v) {
  const int kid = model.id_dims();
  const int kexp = model.exp_dims();
  if (v.size() != kid + kexp + 6) {
    throw InvalidArgumentError("flat parameter vector has size " +
                               std::to_string(v.size()) + ", expected " +
                               std::to_string(kid + kexp + 6));
  }
  ShapeParams p;
  p.id = v.segment(0, kid);
  p.exp = v.segment(kid, kexp);
  p.angles = v.segment(kid + kexp, 3);
  p.translation = v.segment(kid + kexp + 3, 3);
  return p;
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& angles) {
  const double cp = std::cos(angles[0]), sp = std::sin(angles[0]);
  const double cy = std::cos(angles[1]), sy = std::sin(angles[1]);
  const double cr = std::cos(angles[2]), sr = std::sin(angles[2]);
  Eigen::Matrix3d rx, ry, rz;
  rx << 1, 0, 0, 0, cp, -sp, 0, sp, cp;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rz << cr, -sr, 0, sr, cr, 0, 0, 0, 1;
  return rz * ry * rx;
}

std::array<Eigen::Matrix3d, 3> rotation_matrix_derivatives(
    const Eigen::Vector3d& angles) {
  const double cp = std::cos(angles[0]), sp = std::sin(angles[0]);
  const double cy = std::cos(angles[1]), sy = std::sin(angles[1]);
  const double cr = std::cos(angles[2]), sr = std::sin(angles[2]);
  Eigen::Matrix3d rx, ry, rz, dx, dy, dz;
  rx << 1, 0, 0, 0, cp, -sp, 0, sp, cp;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rz << cr, -sr, 0, sr, cr, 0, 0, 0, 1;
  dx << 0, 0, 0, 0, -sp, -cp, 0, cp, -sp;
  dy << -sy, 0, cy, 0, 0, 0, -cy, 0, -sy;
  dz << -sr, -cr, 0, cr, -sr, 0, 0, 0, 0;
  return {rz * ry * dx, rz * dy * rx, dz * ry * rx};
}

Eigen::Matrix3Xd assemble_vertices(const BlendshapeModel& model,
                                   const ShapeParams& params) {
  const int n = model.vertex_count();
  if (params.id.size() != model.id_dims() ||
      params.exp.size() != model.exp_dims()) {
    throw InvalidArgumentError("parameter sizes do not match model bases");
  }
  Eigen::VectorXd offset = model.identity_basis * params.id +
                           model.expression_basis * params.exp;
  Eigen::Matrix3Xd shape =
      model.mean_shape +
      Eigen::Map<const Eigen::Matrix3Xd>(offset.data(), 3, n);
  Eigen::Matrix3Xd out = rotation_matrix(params.angles) * shape;
  out.colwise() += params.translation;
  return out;
}

Eigen::Matrix2Xd project_matrix(const Camera& camera,
                                const Eigen::Matrix3Xd& vertices) {
  Eigen::Matrix2Xd out(2, vertices.cols());
  for (Eigen::Index i = 0; i < vertices.cols(); ++i) {
    ProjectedVertex pv =
        project_vertex(camera, vertices(0, i), vertices(1, i), vertices(2, i));
    out(0, i) = pv.u;
    out(1, i) = pv.v;
  }
  return out;
}

PointSet2D project(const Camera& camera, const Eigen::Matrix3Xd& vertices) {
  Eigen::Matrix2Xd m = project_matrix(camera, vertices);
  PointSet2D set;
  set.points.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) set.points.push_back(m.col(i));
  return set;
}

Eigen::MatrixXd parameter_jacobian(const BlendshapeModel& model,
                                   const Camera& camera,
                                   const ShapeParams& params) {
  const int n = model.vertex_count();
  const int kid = model.id_dims();
  const int kexp = model.exp_dims();
  const int dim = kid + kexp + 6;

  Eigen::VectorXd offset = model.identity_basis * params.id +
                           model.expression_basis * params.exp;
  Eigen::Matrix3Xd shape =
      model.mean_shape +
      Eigen::Map<const Eigen::Matrix3Xd>(offset.data(), 3, n);
  Eigen::Matrix3d rot = rotation_matrix(params.angles);
  auto drot = rotation_matrix_derivatives(params.angles);
  Eigen::Matrix3Xd world = rot * shape;
  world.colwise() += params.translation;

  // Rotated basis columns: d(world)/d(alpha_k) = R * reshape(basis col k).
  std::vector<Eigen::Matrix3Xd> rot_id(static_cast<std::size_t>(kid));
  for (int j = 0; j < kid; ++j) {
    rot_id[static_cast<std::size_t>(j)] =
        rot * Eigen::Map<const Eigen::Matrix3Xd>(
                  model.identity_basis.col(j).data(), 3, n);
  }
  std::vector<Eigen::Matrix3Xd> rot_exp(static_cast<std::size_t>(kexp));
  for (int j = 0; j < kexp; ++j) {
    rot_exp[static_cast<std::size_t>(j)] =
        rot * Eigen::Map<const Eigen::Matrix3Xd>(
                  model.expression_basis.col(j).data(), 3, n);
  }
  std::array<Eigen::Matrix3Xd, 3> dangle;
  for (int a = 0; a < 3; ++a) dangle[a] = drot[a] * shape;

  Eigen::MatrixXd jac(2 * n, dim);
  for (int i = 0; i < n; ++i) {
    ProjectedVertex pv =
        project_vertex(camera, world(0, i), world(1, i), world(2, i));
    auto rows = jac.block(2 * i, 0, 2, dim);
    for (int j = 0; j < kid; ++j) {
      rows.col(j) = pv.d * rot_id[static_cast<std::size_t>(j)].col(i);
    }
    for (int j = 0; j < kexp; ++j) {
      rows.col(kid + j) = pv.d * rot_exp[static_cast<std::size_t>(j)].col(i);
    }
    for (int a = 0; a < 3; ++a) {
      rows.col(kid + kexp + a) = pv.d * dangle[a].col(i);
    }
    rows.block(0, kid + kexp + 3, 2, 3) = pv.d;
  }
  return jac;
}

TargetContext TargetContext::from_targets(const PartPointSets& targets) {
  TargetContext ctx;
  double min_y = std::numeric_limits<double>::infinity();
  for (PartLabel brow : {PartLabel::left_eyebrow, PartLabel::right_eyebrow}) {
    for (const auto& p : targets.at(brow).points) min_y = std::min(min_y, p.y());
  }
  if (std::isfinite(min_y)) ctx.eyebrow_min_y = min_y;

  PointSet2D all;
  for (const auto& [part, set] : targets.sets) {
    (void)part;
    all.points.insert(all.points.end(), set.points.begin(), set.points.end());
  }
  if (!all.points.empty()) {
    ctx.target_union = std::make_shared<SpatialIndex>(build_index(all));
  }
  return ctx;
}

PointSet2D IndexedPoints::to_set(std::optional<PartLabel> label) const {
  PointSet2D set;
  set.points = points;
  set.label = label;
  return set;
}

IndexedPoints part_points_indexed(const BlendshapeModel& model,
                                  const Camera& camera,
                                  const ShapeParams& params, PartLabel part,
                                  const ProjectionFilters& filters,
                                  const TargetContext* target_ctx) {
  const std::vector<int>& indices = model.part_indices(part);
  IndexedPoints out;
  if (indices.empty()) return out;

  Eigen::Matrix3Xd world = assemble_vertices(model, params);
  double z_floor = median_z(world, indices) - filters.visibility_slack;
  out.points.reserve(indices.size());
  out.vertex_ids.reserve(indices.size());
  for (int i : indices) {
    if (world(2, i) < z_floor) continue;
    ProjectedVertex pv =
        project_vertex(camera, world(0, i), world(1, i), world(2, i));
    Point2 q(pv.u, pv.v);
    if (target_ctx != nullptr) {
      if (filters.eyebrow_cut && part == PartLabel::skin &&
          target_ctx->eyebrow_min_y && q.y() < *target_ctx->eyebrow_min_y) {
        continue;
      }
      if (filters.occlusion_radius > 0.0 && target_ctx->target_union &&
          target_ctx->target_union->nearest(q).distance >
              filters.occlusion_radius) {
        continue;
      }
    }
    out.points.push_back(q);
    out.vertex_ids.push_back(i);
  }
  return out;
}

PointSet2D part_points(const BlendshapeModel& model, const Camera& camera,
                       const ShapeParams& params, PartLabel part,
                       const ProjectionFilters& filters,
                       const TargetContext* target_ctx) {
  return part_points_indexed(model, camera, params, part, filters, target_ctx)
      .to_set(part);
}

std::map<PartLabel, std::vector<int>> annotate_parts(
    const BlendshapeModel& model, const Camera& camera,
    const ShapeParams& neutral_params, const PartPointSets& targets, int k,
    const std::vector<char>& visibility, double visibility_slack) {
  const int n = model.vertex_count();
  if (k < 1) throw InvalidArgumentError("annotation requires k >= 1");
  if (!visibility.empty() &&
      visibility.size() != static_cast<std::size_t>(n)) {
    throw InvalidArgumentError("visibility mask size does not match model");
  }
  bool any_target = false;
  for (const auto& [part, set] : targets.sets) {
    (void)part;
    if (!set.empty()) any_target = true;
  }
  if (!any_target) throw AnnotationError("all target parts are empty");

  Eigen::Matrix3Xd world = assemble_vertices(model, neutral_params);
  std::vector<char> visible = visibility;
  if (visible.empty()) {
    double z_floor = median_z(world, {}) - visibility_slack;
    visible.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      visible[static_cast<std::size_t>(i)] = world(2, i) >= z_floor ? 1 : 0;
    }
  }
  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    if (visible[static_cast<std::size_t>(i)]) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw AnnotationError("no visible vertices to annotate");
  }
  Eigen::Matrix2Xd projected = project_matrix(camera, world);

  // votes[vertex][part_code - 1]
  std::vector<std::array<int, kAllParts.size()>> votes(
      static_cast<std::size_t>(n), std::array<int, kAllParts.size()>{});
  std::vector<std::pair<double, int>> scratch;
  scratch.reserve(candidates.size());
  for (PartLabel part : kAllParts) {
    const PointSet2D& target = targets.at(part);
    const int vote_slot = part_code(part) - 1;
    for (const Point2& c : target.points) {
      scratch.clear();
      for (int i : candidates) {
        double dx = projected(0, i) - c.x();
        double dy = projected(1, i) - c.y();
        scratch.emplace_back(dx * dx + dy * dy, i);
      }
      std::size_t take = std::min<std::size_t>(
          static_cast<std::size_t>(k), scratch.size());
      std::partial_sort(scratch.begin(), scratch.begin() + take,
                        scratch.end());
      for (std::size_t t = 0; t < take; ++t) {
        votes[static_cast<std::size_t>(scratch[t].second)][vote_slot] += 1;
      }
    }
  }

  std::map<PartLabel, std::vector<int>> result;
  for (int i = 0; i < n; ++i) {
    const auto& counts = votes[static_cast<std::size_t>(i)];
    int best_slot = -1, best_votes = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (counts[s] > best_votes) {  // ties keep the lower part code
        best_votes = counts[s];
        best_slot = static_cast<int>(s);
      }
    }
    if (best_slot >= 0) {
      result[*part_from_code(best_slot + 1)].push_back(i);
    }
  }
  return result;
}

}  // namespace partfit
