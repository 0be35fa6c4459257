#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace partfit {

struct GradCheckRow {
  std::string op;          // "prdl" | "chamfer" | "nn_directed" |
                           // "soft_silhouette" | "total_loss"
  int instances = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;  // one per checked operation, fixed order
  double tolerance = 0.0;
  bool all_pass = false;
  double wall_seconds = 0.0;  // observability only; never serialized
};

inline constexpr const char* kGradCheckOps[] = {
    "prdl", "chamfer", "nn_directed", "soft_silhouette", "total_loss"};

// Central-finite-difference verification of every analytic gradient in the
// toolkit, on randomized tie-free instances (selection gaps are forced wide
// enough that the FD step cannot flip an argmin/argmax). The relative error
// of an instance is |g_analytic - g_fd|_2 / max(|g_fd|_2, 1e-12) over the
// full gradient vector. `flip_op` negates that operation's analytic
// gradient before comparison -- a self-test hook proving the harness can
// fail.
GradCheckReport run_grad_checks(int instances_per_op = 100,
                                std::uint64_t seed = 7,
                                double tolerance = 1e-5,
                                const std::string& flip_op = {});

// One line per operation plus a verdict line, as printed by the CLI.
std::string format_grad_check_report(const GradCheckReport& report);

// JSON artifact (seed echoed; wall time excluded).
void write_grad_check_json(const std::string& path,
                           const GradCheckReport& report,
                           std::uint64_t seed);

}  // namespace partfit
