#include "partfit/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "partfit/baselines.hpp"
#include "partfit/errors.hpp"
#include "partfit/fitting.hpp"
#include "partfit/prdl.hpp"

namespace partfit {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

PointSet2D random_set(std::mt19937_64& rng, int lo_n, int hi_n, double lo,
                      double hi) {
  PointSet2D out;
  const int n = lo_n + static_cast<int>(rng() % (hi_n - lo_n + 1));
  for (int i = 0; i < n; ++i) {
    out.points.emplace_back(uniform(rng, lo, hi), uniform(rng, lo, hi));
  }
  return out;
}

// Smallest gap between the two nearest and the two farthest of `dists`;
// selections stay put under FD steps when this is wide.
double selection_gap(std::vector<double> dists) {
  if (dists.size() < 2) return 1.0;
  std::sort(dists.begin(), dists.end());
  return std::min(dists[1] - dists[0],
                  dists[dists.size() - 1] - dists[dists.size() - 2]);
}

bool prdl_tie_free(const PointSet2D& pred, const AnchorGrid& anchors,
                   double gap) {
  for (const Point2& a : anchors.anchors.points) {
    std::vector<double> d;
    d.reserve(pred.size());
    for (const Point2& p : pred.points) d.push_back((p - a).norm());
    if (selection_gap(d) < gap) return false;
    if (*std::min_element(d.begin(), d.end()) < 0.05) return false;
  }
  return true;
}

bool nn_tie_free(const PointSet2D& from, const PointSet2D& to, double gap) {
  for (const Point2& q : from.points) {
    double best = 1e300, second = 1e300;
    for (const Point2& t : to.points) {
      const double d = (q - t).norm();
      if (d < best) {
        second = best;
        best = d;
      } else if (d < second) {
        second = d;
      }
    }
    if (to.size() > 1 && second - best < gap) return false;
  }
  return true;
}

double rel_vector_error(const Eigen::VectorXd& analytic,
                        const Eigen::VectorXd& fd) {
  return (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
}

// Central differences over a flat coordinate vector.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double hi = f(probe);
    probe[i] = x[i] - h;
    const double lo = f(probe);
    probe[i] = x[i];
    g[i] = (hi - lo) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd flatten_points(const std::vector<Point2>& pts) {
  Eigen::VectorXd v(2 * static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v[2 * i] = pts[i].x();
    v[2 * i + 1] = pts[i].y();
  }
  return v;
}

PointSet2D unflatten_points(const Eigen::VectorXd& v) {
  PointSet2D out;
  for (Eigen::Index i = 0; i + 1 < v.size(); i += 2) {
    out.points.emplace_back(v[i], v[i + 1]);
  }
  return out;
}

constexpr double kTieGap = 1e-2;
constexpr double kStep = 1e-6;

double check_prdl_instance(std::mt19937_64& rng, bool flip) {
  const AnchorGrid anchors = AnchorGrid::lattice(12, 12);
  PointSet2D pred, target;
  do {
    pred = random_set(rng, 4, 9, 0.3, 11.7);
  } while (!prdl_tie_free(pred, anchors, kTieGap));
  target = random_set(rng, 4, 9, 0.3, 11.7);

  const DistanceFunctionSet fns = DistanceFunctionSet::all();
  PartWeights w;
  w[PartLabel::nose] = 1.0;
  std::map<PartLabel, DescriptorTensor> target_desc;
  target_desc.emplace(PartLabel::nose,
                      compute_descriptor(target, anchors, fns));

  std::map<PartLabel, PointSet2D> pred_map;
  pred_map[PartLabel::nose] = pred;
  const PrdlGradient g =
      prdl_gradient(pred_map, target_desc, anchors, fns, w, 12, 12);
  Eigen::VectorXd analytic =
      flatten_points(g.point_gradients.at(PartLabel::nose));
  if (flip) analytic = -analytic;

  const auto value = [&](const Eigen::VectorXd& x) {
    std::map<PartLabel, DescriptorTensor> pd;
    pd.emplace(PartLabel::nose,
               compute_descriptor(unflatten_points(x), anchors, fns));
    return prdl_loss(pd, target_desc, w, 12, 12);
  };
  const Eigen::VectorXd fd = fd_gradient(value, flatten_points(pred.points), kStep);
  return rel_vector_error(analytic, fd);
}

double check_chamfer_instance(std::mt19937_64& rng, bool flip) {
  PointSet2D pred, target;
  do {
    pred = random_set(rng, 3, 8, 0.0, 10.0);
    target = random_set(rng, 3, 8, 0.0, 10.0);
  } while (!nn_tie_free(pred, target, kTieGap) ||
           !nn_tie_free(target, pred, kTieGap));

  const PointLoss g = chamfer_loss(pred, target);
  Eigen::VectorXd analytic = flatten_points(g.gradient);
  if (flip) analytic = -analytic;

  const auto value = [&](const Eigen::VectorXd& x) {
    return chamfer_loss(unflatten_points(x), target).loss;
  };
  const Eigen::VectorXd fd = fd_gradient(value, flatten_points(pred.points), kStep);
  return rel_vector_error(analytic, fd);
}

double check_nn_directed_instance(std::mt19937_64& rng, bool flip) {
  PointSet2D from, to;
  do {
    from = random_set(rng, 3, 8, 0.0, 10.0);
    to = random_set(rng, 3, 8, 0.0, 10.0);
  } while (!nn_tie_free(from, to, kTieGap));

  const DirectedNNLoss g = nn_loss_directed(from, to);
  Eigen::VectorXd analytic(2 * (from.size() + to.size()));
  analytic << flatten_points(g.grad_from), flatten_points(g.grad_to);
  if (flip) analytic = -analytic;

  const Eigen::Index nf = 2 * static_cast<Eigen::Index>(from.size());
  Eigen::VectorXd x(analytic.size());
  x << flatten_points(from.points), flatten_points(to.points);
  const auto value = [&](const Eigen::VectorXd& v) {
    return nn_loss_directed(unflatten_points(v.head(nf)),
                            unflatten_points(v.tail(v.size() - nf)))
        .loss;
  };
  const Eigen::VectorXd fd = fd_gradient(value, x, kStep);
  return rel_vector_error(analytic, fd);
}

double check_soft_silhouette_instance(std::mt19937_64& rng, bool flip) {
  PartMask mask = PartMask::zeros(16, 16);
  const int pixels = 6 + static_cast<int>(rng() % 7);
  for (int i = 0; i < pixels; ++i) {
    mask.set(static_cast<int>(rng() % 16), static_cast<int>(rng() % 16), true);
  }
  // Keep every point off the mask pixels so the kernel cap (a genuine flat
  // spot of the loss) stays out of reach of the FD step.
  PointSet2D pred;
  bool clear = false;
  while (!clear) {
    pred = random_set(rng, 5, 8, 0.0, 16.0);
    clear = true;
    for (const Point2& p : pred.points) {
      for (int y = 0; y < 16 && clear; ++y) {
        for (int x = 0; x < 16; ++x) {
          if (mask.at(x, y) && (p - Point2(x, y)).norm() < 0.05) {
            clear = false;
            break;
          }
        }
      }
    }
  }

  const SoftSilhouetteConfig cfg;
  const PointLoss g = soft_silhouette_iou_loss(pred, mask, cfg);
  Eigen::VectorXd analytic = flatten_points(g.gradient);
  if (flip) analytic = -analytic;

  const auto value = [&](const Eigen::VectorXd& x) {
    return soft_silhouette_iou_loss(unflatten_points(x), mask, cfg).loss;
  };
  const Eigen::VectorXd fd = fd_gradient(value, flatten_points(pred.points), kStep);
  return rel_vector_error(analytic, fd);
}

// Minimal eight-part model with dense random bases; enough structure to
// exercise every term of the full objective.
BlendshapeModel tiny_model(std::mt19937_64& rng) {
  constexpr int kPer = 3;
  constexpr int n = kPer * 8;
  BlendshapeModel m;
  m.mean_shape.resize(3, n);
  for (int i = 0; i < n; ++i) {
    m.mean_shape.col(i) = Eigen::Vector3d(uniform(rng, -0.8, 0.8),
                                          uniform(rng, -0.8, 0.8),
                                          uniform(rng, -0.1, 0.1));
  }
  m.identity_basis.resize(3 * n, 3);
  m.expression_basis.resize(3 * n, 2);
  for (Eigen::Index r = 0; r < 3 * n; ++r) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      m.identity_basis(r, c) = uniform(rng, -0.2, 0.2);
    }
    for (Eigen::Index c = 0; c < 2; ++c) {
      m.expression_basis(r, c) = uniform(rng, -0.2, 0.2);
    }
  }
  int next = 0;
  for (PartLabel p : kAllParts) {
    std::vector<int>& ids = m.part_annotation[p];
    for (int i = 0; i < kPer; ++i) ids.push_back(next++);
  }
  m.landmark_indices = {0, 7, 20};
  m.validate();
  return m;
}

double check_total_loss_instance(std::mt19937_64& rng, bool flip) {
  const BlendshapeModel model = tiny_model(rng);
  Camera camera;
  if (rng() % 2 == 0) {
    camera.mode = Camera::Mode::orthographic;
    camera.scale = 3.0;
    camera.cx = 4.0;
    camera.cy = 4.0;
  } else {
    camera.mode = Camera::Mode::weak_perspective;
    camera.focal = 36.0;
    camera.z_offset = 12.0;
    camera.cx = 4.0;
    camera.cy = 4.0;
  }
  constexpr int kH = 8, kW = 8;

  PartPointSets targets = PartPointSets::empty(kW, kH);
  for (PartLabel p : kAllParts) {
    targets.at(p) = random_set(rng, 3, 6, 0.5, 7.5);
    targets.at(p).label = p;
  }
  LandmarkSet lms;
  lms.landmarks.push_back({0, uniform(rng, 1.0, 7.0), uniform(rng, 1.0, 7.0)});
  lms.landmarks.push_back({7, uniform(rng, 1.0, 7.0), uniform(rng, 1.0, 7.0)});

  LossWeights weights;
  weights.prdl = 1.0;
  weights.landmark = 1.0;
  weights.regularization = 0.3;
  weights.exp_reg_scale = 0.7;

  FitConfig config;
  config.anchor_count = 0;  // full lattice
  config.filters.visibility_slack = 1e9;
  config.filters.eyebrow_cut = false;
  config.filters.occlusion_radius = -1.0;

  ShapeParams params = ShapeParams::zero(model);
  for (Eigen::Index i = 0; i < params.id.size(); ++i) {
    params.id[i] = uniform(rng, -0.3, 0.3);
  }
  for (Eigen::Index i = 0; i < params.exp.size(); ++i) {
    params.exp[i] = uniform(rng, -0.3, 0.3);
  }
  params.angles = Eigen::Vector3d(uniform(rng, -0.15, 0.15),
                                  uniform(rng, -0.15, 0.15),
                                  uniform(rng, -0.15, 0.15));
  params.translation = Eigen::Vector3d(uniform(rng, -0.3, 0.3),
                                       uniform(rng, -0.3, 0.3),
                                       uniform(rng, -0.3, 0.3));

  const FitProblem problem(model, camera, targets, lms, weights, config);

  // Reject instances whose descriptor selections sit near a tie at the
  // evaluation point: probe each part's projected set directly.
  for (PartLabel p : kAllParts) {
    const IndexedPoints pts = part_points_indexed(model, camera, params, p,
                                                  config.filters, nullptr);
    PointSet2D set = pts.to_set(p);
    if (set.size() < 2) return check_total_loss_instance(rng, flip);
    if (!prdl_tie_free(set, problem.anchors(), 1e-3)) {
      return check_total_loss_instance(rng, flip);
    }
  }

  LossBreakdown bd = problem.evaluate(params);
  Eigen::VectorXd analytic = bd.gradient;
  if (flip) analytic = -analytic;

  const auto value = [&](const Eigen::VectorXd& v) {
    return problem.evaluate(ShapeParams::unflatten(model, v)).total;
  };
  const Eigen::VectorXd fd = fd_gradient(value, params.flatten(), kStep);
  return rel_vector_error(analytic, fd);
}

GradCheckRow run_op(const std::string& op, int instances, std::uint64_t seed,
                    double tolerance, bool flip) {
  std::mt19937_64 rng(seed);
  GradCheckRow row;
  row.op = op;
  row.instances = instances;
  for (int i = 0; i < instances; ++i) {
    double err = 0.0;
    if (op == "prdl") {
      err = check_prdl_instance(rng, flip);
    } else if (op == "chamfer") {
      err = check_chamfer_instance(rng, flip);
    } else if (op == "nn_directed") {
      err = check_nn_directed_instance(rng, flip);
    } else if (op == "soft_silhouette") {
      err = check_soft_silhouette_instance(rng, flip);
    } else {
      err = check_total_loss_instance(rng, flip);
    }
    row.max_rel_err = std::max(row.max_rel_err, err);
  }
  row.pass = row.max_rel_err <= tolerance;
  return row;
}

}  // namespace

GradCheckReport run_grad_checks(int instances_per_op, std::uint64_t seed,
                                double tolerance, const std::string& flip_op) {
  if (instances_per_op < 1) {
    throw InvalidArgumentError("grad check needs at least one instance");
  }
  if (!flip_op.empty()) {
    const auto* end = std::end(kGradCheckOps);
    if (std::find(std::begin(kGradCheckOps), end, flip_op) == end) {
      throw InvalidArgumentError("unknown operation '" + flip_op + "'");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  report.tolerance = tolerance;
  report.all_pass = true;
  std::uint64_t op_seed = seed;
  for (const char* op : kGradCheckOps) {
    report.rows.push_back(
        run_op(op, instances_per_op, op_seed++, tolerance, flip_op == op));
    report.all_pass = report.all_pass && report.rows.back().pass;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

std::string format_grad_check_report(const GradCheckReport& report) {
  std::string out;
  char buf[128];
  for (const GradCheckRow& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%-16s instances=%-4d max_rel_err=%.3e %s\n",
                  row.op.c_str(), row.instances, row.max_rel_err,
                  row.pass ? "pass" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "tolerance=%.1e overall=%s\n",
                report.tolerance, report.all_pass ? "pass" : "FAIL");
  out += buf;
  return out;
}

void write_grad_check_json(const std::string& path,
                           const GradCheckReport& report,
                           std::uint64_t seed) {
  nlohmann::ordered_json doc;
  doc["format"] = "partfit-grad-check";
  doc["version"] = 1;
  doc["seed"] = seed;
  doc["tolerance"] = report.tolerance;
  doc["all_pass"] = report.all_pass;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const GradCheckRow& row : report.rows) {
    nlohmann::ordered_json r;
    r["op"] = row.op;
    r["instances"] = row.instances;
    r["max_rel_err"] = row.max_rel_err;
    r["pass"] = row.pass;
    rows.push_back(r);
  }
  doc["rows"] = rows;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

}  // namespace partfit
