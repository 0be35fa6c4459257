#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "partfit/ingest.hpp"
#include "partfit/prdl.hpp"
#include "partfit/shape_model.hpp"

namespace partfit {

// Scale factors of the fitting objective
//   E = w_prdl * E_reproj + w_landmark * E_lmk + w_reg * E_reg.
struct LossWeights {
  double prdl = 0.8e-3;
  double landmark = 1.6e-3;
  double regularization = 3e-4;
  double exp_reg_scale = 1.0;  // expression term multiplier inside E_reg
  PartWeights part_weights;    // per-part w_p inside E_reproj; missing = 1

  static LossWeights defaults() { return LossWeights{}; }
  // Part re-projection signal only (landmark term off, damping kept).
  static LossWeights prdl_only() {
    LossWeights w;
    w.landmark = 0.0;
    return w;
  }
};

struct FitConfig {
  int max_iters = 2000;
  double learning_rate = 1e-4;
  double beta1 = 0.9;           // Adam first-moment decay
  double beta2 = 0.999;         // Adam second-moment decay
  double adam_epsilon = 1e-8;
  int anchor_count = 512;       // farthest-point anchor subsample; 0 = full
  int anchor_start = 0;
  int skin_point_cap = 3000;    // cap on skin set sizes; 0 = uncapped
  double tolerance = 1e-6;      // relative loss change counted as stalled
  int patience = 20;            // consecutive stalled iterations to stop
  std::uint64_t seed = 0;       // echoed into reports for provenance
  ProjectionFilters filters;
  double prdl_epsilon = 1e-6;
  DistanceFunctionSet functions = DistanceFunctionSet::all();
};

// Mean squared pixel error of sparse vertex-to-point correspondences,
// normalized by the image area like the re-projection term. The gradient
// is per landmark, on the projected vertex position.
struct LandmarkLoss {
  double loss = 0.0;
  std::vector<Point2> point_gradients;  // aligned with the landmark order
};
LandmarkLoss landmark_loss(const Eigen::Matrix2Xd& projected_vertices,
                           const LandmarkSet& landmarks, int height,
                           int width);

// |alpha_id|^2 + exp_scale * |alpha_exp|^2; pose and translation are free.
struct RegularizationLoss {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // wrt the flat parameter vector
};
RegularizationLoss regularization_loss(const ShapeParams& params,
                                       double exp_scale = 1.0);

// One evaluation of the full objective at a parameter vector. The three
// terms are already weight-scaled, so prdl + landmark + regularization
// equals total exactly.
struct LossBreakdown {
  double prdl = 0.0;
  double landmark = 0.0;
  double regularization = 0.0;
  double total = 0.0;
  Eigen::VectorXd gradient;  // wrt the flat parameter vector
  int clamped_pairs = 0;     // singularity guards hit inside the descriptor
  int dropped_parts = 0;     // parts whose prediction filtered to empty
};

// Precomputed fitting state: target descriptors over the anchor set, the
// prediction-side filter context, and validated landmarks. Evaluations at
// different parameters share this state; everything is deterministic.
class FitProblem {
 public:
  FitProblem(BlendshapeModel model, Camera camera, PartPointSets targets,
             LandmarkSet landmarks, LossWeights weights, FitConfig config);

  LossBreakdown evaluate(const ShapeParams& params) const;

  // True when at least one target part is non-empty or landmarks exist.
  bool has_signal() const;

  const AnchorGrid& anchors() const { return anchors_; }
  const PartWeights& effective_weights() const { return effective_weights_; }
  const BlendshapeModel& model() const { return model_; }
  const Camera& camera() const { return camera_; }
  const FitConfig& config() const { return config_; }

 private:
  BlendshapeModel model_;
  Camera camera_;
  PartPointSets targets_;
  LandmarkSet landmarks_;
  LossWeights weights_;
  FitConfig config_;
  AnchorGrid anchors_;
  PartWeights effective_weights_;  // zero where the target part is empty
  std::map<PartLabel, DescriptorTensor> target_descriptors_;
  TargetContext target_ctx_;
};

// Convenience single evaluation (builds the problem, evaluates once).
LossBreakdown total_loss(const BlendshapeModel& model, const Camera& camera,
                         const ShapeParams& params,
                         const PartPointSets& targets,
                         const LandmarkSet& landmarks,
                         const LossWeights& weights = {},
                         const FitConfig& config = {});

struct LossRow {
  double prdl = 0.0;
  double landmark = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

struct FitReport {
  ShapeParams final_params;
  std::vector<LossRow> curve;  // one row per evaluated iteration
  std::string termination;     // "converged" | "max_iters" | "nan_abort"
  int iterations = 0;
  double wall_seconds = 0.0;   // observability only; never serialized
  long clamped_pairs = 0;
  int dropped_part_evals = 0;
  std::uint64_t seed = 0;
  // Optional evaluation results filled in by benchmark drivers.
  std::map<PartLabel, double> part_iou;
  double mean_iou = -1.0;  // negative = not evaluated
};

// Adam descent of an arbitrary objective over the flat parameter vector,
// starting from `init` (zeros when absent). Stops on a stalled relative
// loss change (`tolerance` for `patience` consecutive iterations), on
// max_iters, or on a non-finite evaluation (final params then roll back to
// the last finite iterate). The trajectory is a pure function of its
// inputs. Benchmark drivers reuse this loop for the alternative losses.
FitReport adam_fit(
    const BlendshapeModel& model,
    const std::function<LossBreakdown(const ShapeParams&)>& objective,
    const FitConfig& config,
    const std::optional<ShapeParams>& init = std::nullopt);

// The full pipeline: builds a FitProblem and descends its objective.
// Throws NothingToFitError when every target part is empty and there are
// no landmarks.
FitReport fit(const BlendshapeModel& model, const Camera& camera,
              const PartPointSets& targets, const LandmarkSet& landmarks,
              const LossWeights& weights = {}, const FitConfig& config = {},
              const std::optional<ShapeParams>& init = std::nullopt);

// Deterministic artifacts: field order, formatting, and content depend only
// on the report (wall time deliberately excluded).
void write_fit_report_json(const std::string& path, const FitReport& report);
void write_loss_curve_csv(const std::string& path, const FitReport& report);

}  // namespace partfit
