#include "partfit/fitting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

// Caps a projected part at `cap` points via farthest point sampling while
// keeping the vertex-id alignment (selection starts at the first point).
IndexedPoints cap_indexed(IndexedPoints pts, int cap) {
  if (cap <= 0 || static_cast<int>(pts.size()) <= cap) return pts;
  PointSet2D as_set;
  as_set.points = pts.points;
  const std::vector<int> keep = farthest_point_sampling_indices(as_set, cap, 0);
  IndexedPoints out;
  out.points.reserve(keep.size());
  out.vertex_ids.reserve(keep.size());
  for (int k : keep) {
    out.points.push_back(pts.points[k]);
    out.vertex_ids.push_back(pts.vertex_ids[k]);
  }
  return out;
}

PointSet2D cap_set(const PointSet2D& set, int cap) {
  if (cap <= 0 || static_cast<int>(set.points.size()) <= cap) return set;
  return farthest_point_sampling(set, cap, 0);
}

// Scatter one projected point's 2D gradient through its two Jacobian rows.
void chain_point(const Eigen::MatrixXd& jac, int vertex, const Point2& g,
                 double scale, Eigen::VectorXd* out) {
  out->noalias() += scale * g.x() * jac.row(2 * vertex).transpose();
  out->noalias() += scale * g.y() * jac.row(2 * vertex + 1).transpose();
}

}  // namespace

LandmarkLoss landmark_loss(const Eigen::Matrix2Xd& projected_vertices,
                           const LandmarkSet& landmarks, int height,
                           int width) {
  if (height < 1 || width < 1) {
    throw InvalidArgumentError("landmark_loss: image area must be positive");
  }
  LandmarkLoss out;
  out.point_gradients.assign(landmarks.size(), Point2::Zero());
  if (landmarks.empty()) return out;
  const double inv_area = 1.0 / (static_cast<double>(height) * width);
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const Landmark& lm = landmarks.landmarks[i];
    if (lm.vertex_index < 0 ||
        lm.vertex_index >= static_cast<int>(projected_vertices.cols())) {
      throw InvalidArgumentError("landmark_loss: vertex index out of range");
    }
    const Point2 diff =
        projected_vertices.col(lm.vertex_index) - Point2(lm.x, lm.y);
    out.loss += inv_area * diff.squaredNorm();
    out.point_gradients[i] = 2.0 * inv_area * diff;
  }
  return out;
}

RegularizationLoss regularization_loss(const ShapeParams& params,
                                       double exp_scale) {
  RegularizationLoss out;
  out.loss = params.id.squaredNorm() + exp_scale * params.exp.squaredNorm();
  out.gradient = Eigen::VectorXd::Zero(params.dim());
  out.gradient.head(params.id.size()) = 2.0 * params.id;
  out.gradient.segment(params.id.size(), params.exp.size()) =
      2.0 * exp_scale * params.exp;
  return out;
}

FitProblem::FitProblem(BlendshapeModel model, Camera camera,
                       PartPointSets targets, LandmarkSet landmarks,
                       LossWeights weights, FitConfig config)
    : model_(std::move(model)),
      camera_(camera),
      targets_(std::move(targets)),
      landmarks_(std::move(landmarks)),
      weights_(weights),
      config_(std::move(config)) {
  model_.validate();
  if (targets_.width < 1 || targets_.height < 1) {
    throw InvalidArgumentError("fit targets need a positive image size");
  }
  for (const Landmark& lm : landmarks_.landmarks) {
    if (lm.vertex_index < 0 || lm.vertex_index >= model_.vertex_count()) {
      throw InvalidArgumentError("landmark vertex index out of range");
    }
  }
  if (!(config_.tolerance >= 0.0) || config_.patience < 1 ||
      config_.max_iters < 1 || !(config_.learning_rate > 0.0)) {
    throw InvalidArgumentError("fit config values out of range");
  }

  // Filter context comes from the full targets; the descriptor targets may
  // then be capped for cost.
  target_ctx_ = TargetContext::from_targets(targets_);
  if (auto it = targets_.sets.find(PartLabel::skin); it != targets_.sets.end()) {
    it->second = cap_set(it->second, config_.skin_point_cap);
  }

  AnchorGrid full = AnchorGrid::lattice(targets_.width, targets_.height);
  if (config_.anchor_count > 0 &&
      config_.anchor_count < static_cast<int>(full.size())) {
    anchors_ = subsample_anchors(full, config_.anchor_count,
                                 config_.anchor_start);
  } else {
    anchors_ = std::move(full);
  }

  for (const auto& [part, set] : targets_.sets) {
    auto wit = weights_.part_weights.find(part);
    double w = wit == weights_.part_weights.end() ? 1.0 : wit->second;
    if (w < 0.0) {
      throw InvalidArgumentError("part weights must be non-negative");
    }
    if (set.points.empty()) w = 0.0;  // unobserved part carries no signal
    effective_weights_[part] = w;
    if (w > 0.0) {
      target_descriptors_[part] =
          compute_descriptor(set, anchors_, config_.functions);
    }
  }
}

bool FitProblem::has_signal() const {
  for (const auto& [part, set] : targets_.sets) {
    if (!set.points.empty()) return true;
  }
  return !landmarks_.empty();
}

LossBreakdown FitProblem::evaluate(const ShapeParams& params) const {
  if (params.id.size() != model_.id_dims() ||
      params.exp.size() != model_.exp_dims()) {
    throw InvalidArgumentError("parameter dimensions do not match the model");
  }
  LossBreakdown out;
  out.gradient = Eigen::VectorXd::Zero(params.dim());

  const Eigen::MatrixXd jac = parameter_jacobian(model_, camera_, params);

  // Re-projection term: project and filter each active part, dropping parts
  // whose prediction vanished this evaluation.
  PartWeights eval_weights = effective_weights_;
  std::map<PartLabel, PointSet2D> pred_sets;
  std::map<PartLabel, IndexedPoints> pred_indexed;
  for (const auto& [part, w] : effective_weights_) {
    if (w <= 0.0) continue;
    IndexedPoints pts = part_points_indexed(model_, camera_, params, part,
                                            config_.filters, &target_ctx_);
    if (part == PartLabel::skin) {
      pts = cap_indexed(std::move(pts), config_.skin_point_cap);
    }
    if (pts.empty()) {
      eval_weights[part] = 0.0;
      ++out.dropped_parts;
      continue;
    }
    pred_sets[part] = pts.to_set(part);
    pred_indexed[part] = std::move(pts);
  }

  if (weights_.prdl != 0.0 && !target_descriptors_.empty()) {
    const PrdlGradient g =
        prdl_gradient(pred_sets, target_descriptors_, anchors_,
                      config_.functions, eval_weights, targets_.height,
                      targets_.width, config_.prdl_epsilon);
    out.prdl = weights_.prdl * g.loss;
    out.clamped_pairs = g.clamped_pairs;
    for (const auto& [part, grads] : g.point_gradients) {
      const IndexedPoints& pts = pred_indexed.at(part);
      for (std::size_t k = 0; k < grads.size(); ++k) {
        chain_point(jac, pts.vertex_ids[k], grads[k], weights_.prdl,
                    &out.gradient);
      }
    }
  }

  if (weights_.landmark != 0.0 && !landmarks_.empty()) {
    const Eigen::Matrix2Xd proj =
        project_matrix(camera_, assemble_vertices(model_, params));
    const LandmarkLoss lmk =
        landmark_loss(proj, landmarks_, targets_.height, targets_.width);
    out.landmark = weights_.landmark * lmk.loss;
    for (std::size_t i = 0; i < landmarks_.size(); ++i) {
      chain_point(jac, landmarks_.landmarks[i].vertex_index,
                  lmk.point_gradients[i], weights_.landmark, &out.gradient);
    }
  }

  if (weights_.regularization != 0.0) {
    const RegularizationLoss reg =
        regularization_loss(params, weights_.exp_reg_scale);
    out.regularization = weights_.regularization * reg.loss;
    out.gradient.noalias() += weights_.regularization * reg.gradient;
  }

  out.total = out.prdl + out.landmark + out.regularization;
  return out;
}

LossBreakdown total_loss(const BlendshapeModel& model, const Camera& camera,
                         const ShapeParams& params,
                         const PartPointSets& targets,
                         const LandmarkSet& landmarks,
                         const LossWeights& weights, const FitConfig& config) {
  return FitProblem(model, camera, targets, landmarks, weights, config)
      .evaluate(params);
}

FitReport adam_fit(
    const BlendshapeModel& model,
    const std::function<LossBreakdown(const ShapeParams&)>& objective,
    const FitConfig& config, const std::optional<ShapeParams>& init) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(config.tolerance >= 0.0) || config.patience < 1 ||
      config.max_iters < 1 || !(config.learning_rate > 0.0)) {
    throw InvalidArgumentError("fit config values out of range");
  }

  ShapeParams params = init.value_or(ShapeParams::zero(model));
  if (params.id.size() != model.id_dims() ||
      params.exp.size() != model.exp_dims()) {
    throw InvalidArgumentError("initial parameters do not match the model");
  }

  FitReport report;
  report.seed = config.seed;

  const int dim = params.dim();
  Eigen::VectorXd flat = params.flatten();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  ShapeParams last_finite = params;
  int stalled = 0;
  for (int t = 1; t <= config.max_iters; ++t) {
    const LossBreakdown b = objective(params);
    if (!std::isfinite(b.total) || !b.gradient.allFinite()) {
      report.termination = "nan_abort";
      params = last_finite;  // roll back to the last finite iterate
      break;
    }
    last_finite = params;
    report.clamped_pairs += b.clamped_pairs;
    report.dropped_part_evals += b.dropped_parts;
    if (!report.curve.empty()) {
      const double prev = report.curve.back().total;
      const double rel =
          std::abs(b.total - prev) / std::max(std::abs(prev), 1e-12);
      stalled = rel < config.tolerance ? stalled + 1 : 0;
    }
    report.curve.push_back({b.prdl, b.landmark, b.regularization, b.total});
    if (stalled >= config.patience) {
      report.termination = "converged";
      break;
    }

    beta1_t *= config.beta1;
    beta2_t *= config.beta2;
    m = config.beta1 * m + (1.0 - config.beta1) * b.gradient;
    v = config.beta2 * v +
        (1.0 - config.beta2) * b.gradient.cwiseProduct(b.gradient);
    const Eigen::VectorXd m_hat = m / (1.0 - beta1_t);
    const Eigen::VectorXd v_hat = v / (1.0 - beta2_t);
    flat -= config.learning_rate *
            (m_hat.array() / (v_hat.array().sqrt() + config.adam_epsilon))
                .matrix();
    params = ShapeParams::unflatten(model, flat);
  }
  if (report.termination.empty()) report.termination = "max_iters";

  report.final_params = params;
  report.iterations = static_cast<int>(report.curve.size());
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

FitReport fit(const BlendshapeModel& model, const Camera& camera,
              const PartPointSets& targets, const LandmarkSet& landmarks,
              const LossWeights& weights, const FitConfig& config,
              const std::optional<ShapeParams>& init) {
  auto problem = std::make_shared<FitProblem>(model, camera, targets,
                                              landmarks, weights, config);
  if (!problem->has_signal()) {
    throw NothingToFitError(
        "every target part is empty and there are no landmarks");
  }
  return adam_fit(
      model,
      [problem](const ShapeParams& p) { return problem->evaluate(p); },
      config, init);
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::ordered_json vector_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

void write_fit_report_json(const std::string& path, const FitReport& report) {
  nlohmann::ordered_json j;
  j["format"] = "partfit-fit-report";
  j["version"] = 1;
  j["seed"] = report.seed;
  j["termination"] = report.termination;
  j["iterations"] = report.iterations;
  j["clamped_pairs"] = report.clamped_pairs;
  j["dropped_part_evals"] = report.dropped_part_evals;

  nlohmann::ordered_json params;
  params["id"] = vector_json(report.final_params.id);
  params["exp"] = vector_json(report.final_params.exp);
  params["angles"] = vector_json(report.final_params.angles);
  params["translation"] = vector_json(report.final_params.translation);
  j["final_params"] = std::move(params);

  if (!report.curve.empty()) {
    nlohmann::ordered_json losses;
    const LossRow& last = report.curve.back();
    losses["prdl"] = last.prdl;
    losses["landmark"] = last.landmark;
    losses["regularization"] = last.regularization;
    losses["total"] = last.total;
    j["final_losses"] = std::move(losses);
  }

  if (report.mean_iou >= 0.0) {
    nlohmann::ordered_json iou;
    for (const auto& [part, value] : report.part_iou) {
      iou[std::string(part_name(part))] = value;
    }
    j["part_iou"] = std::move(iou);
    j["mean_iou"] = report.mean_iou;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed while writing " + path);
}

void write_loss_curve_csv(const std::string& path, const FitReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "iter,prdl,landmark,regularization,total\n";
  for (std::size_t i = 0; i < report.curve.size(); ++i) {
    const LossRow& r = report.curve[i];
    out << i << "," << fmt_double(r.prdl) << "," << fmt_double(r.landmark)
        << "," << fmt_double(r.regularization) << "," << fmt_double(r.total)
        << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace partfit
