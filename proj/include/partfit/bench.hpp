#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "partfit/baselines.hpp"
#include "partfit/fitting.hpp"
#include "partfit/metrics.hpp"

namespace partfit {

// The registered fitting objectives the comparison harness can drive. All
// of them chain point gradients through the same parameter Jacobian; only
// the point-set term differs.
enum class LossKind { prdl, chamfer, nn_directed, soft_silhouette };

inline constexpr std::array<LossKind, 4> kAllLossKinds = {
    LossKind::prdl, LossKind::chamfer, LossKind::nn_directed,
    LossKind::soft_silhouette};

std::string_view loss_kind_name(LossKind k);

// A self-contained fitting experiment: the model, what the losses see
// (point targets and silhouette masks), what counts as correct (gt_masks,
// which may deliberately differ from the loss targets), and how to run.
struct Scenario {
  std::string name;
  BlendshapeModel model;
  Camera camera;
  PartPointSets targets;                    // point targets for the losses
  std::map<PartLabel, PartMask> loss_masks; // silhouette-loss targets
  std::map<PartLabel, PartMask> gt_masks;   // IoU ground truth
  LandmarkSet landmarks;
  ShapeParams init;
  LossWeights weights;
  FitConfig config;
  int splat_radius = 1;
  double soft_sigma = 1.5;
};

// Toy face self-recovery: targets are the rasterized ground-truth parts,
// the fit starts from zeros with re-projection-only weights.
Scenario toy_recovery_scenario(std::uint64_t seed, int n_vertices = 600);

// Translation-only disc displaced `displacement_sigmas * sigma` pixels from
// its target: far outside the silhouette kernel's support but squarely in
// range of distance-field descriptors. Occlusion filtering is off (the
// whole premise is a large initial offset) and the step size is raised to
// cover the travel within the iteration budget.
Scenario displaced_disc_scenario(double displacement_sigmas = 20.0,
                                 double sigma = 1.5);

// Translation-only disc whose loss targets contain a small decoy cluster
// (~6% of the points) part-way along the path to the real target; the IoU
// ground truth is the real cluster only. Nearest-neighbor pulls park on
// the decoy; set-level descriptors should not.
Scenario two_cluster_decoy_scenario(std::uint64_t seed);

// Runs one fit of the scenario under the given objective. PRDL uses the
// full fitting pipeline; the baselines share the same Adam loop, filters,
// Jacobian chaining, and regularization, swapping only the data term.
// The report's IoU fields are filled against scenario.gt_masks.
FitReport run_scenario(const Scenario& scenario, LossKind loss);

// IoU of the scenario's model at `params` against its ground-truth masks.
IoUReport scenario_iou(const Scenario& scenario, const ShapeParams& params);

struct ComparisonRow {
  std::string loss;
  double grad_norm_init = 0.0;
  double final_total = 0.0;
  int iterations = 0;
  std::string termination;
  double mean_iou = 0.0;
  std::map<PartLabel, double> part_iou;
  double wall_seconds = 0.0;   // observability only; never serialized
  std::vector<LossRow> curve;  // for plots; never serialized
};

struct ComparisonTable {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<ComparisonRow> rows;  // one per requested loss, input order
};

// Identical init/config/seed across losses; rows in the requested order.
ComparisonTable run_loss_comparison(const Scenario& scenario,
                                    const std::vector<LossKind>& losses);

struct AblationRow {
  std::string functions;  // canonical comma-joined set, e.g. "min,max,ave"
  double mean_iou = 0.0;
  double min_iou = 1.0;
  int runs = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // min, max, ave, min+max+ave in that order
  std::vector<std::uint64_t> seeds;  // battery seeds, input order
};

// Re-fits every scenario of the battery under each descriptor function
// subset in {min}, {max}, {ave}, {min,max,ave}, keeping everything else
// identical, and aggregates IoU per variant. Runs are independent; `jobs`
// bounds the worker threads and results merge by task index, so the table
// does not depend on scheduling.
AblationTable run_distance_ablation(const std::vector<Scenario>& battery,
                                    int jobs = 1);

// Deterministic table artifacts (timing excluded).
void write_comparison_csv(const std::string& path, const ComparisonTable& t);
void write_comparison_json(const std::string& path, const ComparisonTable& t);
void write_ablation_csv(const std::string& path, const AblationTable& t);
void write_ablation_json(const std::string& path, const AblationTable& t);

}  // namespace partfit
