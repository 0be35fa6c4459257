#pragma once

#include <cstdint>
#include <istream>
#include <set>
#include <string>
#include <vector>

#include "partfit/bench.hpp"
#include "partfit/fitting.hpp"
#include "partfit/ingest.hpp"
#include "partfit/shape_model.hpp"

namespace partfit::cli {

// Everything the commands can be configured with, grouped the same way the
// config file sections are. Defaults equal the library defaults.
struct RunConfig {
  Camera camera;
  LossWeights weights;
  FitConfig fit;
  IngestConfig ingest;
  int splat_radius = 1;
  double soft_sigma = 1.5;
};

// A parsed config remembers which `section.key` entries the file actually
// set, so scenario files can override just those fields.
struct ParsedConfig {
  RunConfig values;
  std::set<std::string> present;
};

// Line-oriented `[section]` + `key = value` text. `#` starts a comment;
// unknown sections or keys, malformed values, and out-of-vocabulary enum
// names are FormatErrors that cite `origin` and the line number.
ParsedConfig parse_run_config(std::istream& in,
                              const std::string& origin = "<config>");
ParsedConfig load_run_config(const std::string& path);

// Canonical text with every key present; parses back to the same values.
std::string dump_run_config(const RunConfig& cfg);

// Experiment description for `compare` and `ablate`: a [scenario] section
// choosing the generator plus optional overrides of the tuning sections
// ([optimizer], [weights], [sampling], [prdl], [filters], [bench]).
// [camera] and [ingest] belong to the generators and are rejected, as is
// optimizer.seed (seeds come from the seed list).
struct ExperimentSpec {
  std::string kind = "toy-recovery";  // | "displaced-disc" |
                                      // "two-cluster-decoy"
  std::vector<std::uint64_t> seeds = {1};
  int n_vertices = 600;               // toy-recovery
  double displacement_sigmas = 20.0;  // displaced-disc
  double sigma = 1.5;                 // displaced-disc
  std::vector<LossKind> losses = {LossKind::prdl, LossKind::chamfer,
                                  LossKind::nn_directed,
                                  LossKind::soft_silhouette};
  ParsedConfig overrides;
};

ExperimentSpec parse_experiment(std::istream& in,
                                const std::string& origin = "<experiment>");
ExperimentSpec load_experiment(const std::string& path);

// Instantiates the experiment's scenario kind for one seed and applies the
// overrides.
Scenario build_scenario(const ExperimentSpec& spec, std::uint64_t seed);

// Full command-line surface. Exit codes: 0 success, 1 usage or IO, 2
// numerical abort (NaN fit or failed gradient check).
int run_cli(int argc, const char* const* argv);

}  // namespace partfit::cli
