#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

#include "partfit/baselines.hpp"
#include "partfit/bench.hpp"
#include "partfit/errors.hpp"
#include "partfit/gradcheck.hpp"
#include "partfit/parts.hpp"
#include "partfit/prdl.hpp"
#include "partfit/shape_model.hpp"
#include "partfit/toy.hpp"

namespace py = pybind11;
using namespace partfit;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointSet2D to_points(const DoubleArray& arr, const char* what) {
  if (arr.ndim() != 2 || arr.shape(1) != 2) {
    throw InvalidArgumentError(std::string(what) +
                               " must be an (N, 2) float array");
  }
  PointSet2D set;
  const auto view = arr.unchecked<2>();
  set.points.reserve(static_cast<std::size_t>(view.shape(0)));
  for (py::ssize_t i = 0; i < view.shape(0); ++i) {
    set.points.emplace_back(view(i, 0), view(i, 1));
  }
  return set;
}

py::array_t<double> from_points(const std::vector<Point2>& pts) {
  py::array_t<double> arr({static_cast<py::ssize_t>(pts.size()),
                           static_cast<py::ssize_t>(2)});
  auto view = arr.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    view(static_cast<py::ssize_t>(i), 0) = pts[i].x();
    view(static_cast<py::ssize_t>(i), 1) = pts[i].y();
  }
  return arr;
}

py::array_t<double> from_matrix(const Eigen::MatrixXd& m) {
  py::array_t<double> arr({static_cast<py::ssize_t>(m.rows()),
                           static_cast<py::ssize_t>(m.cols())});
  auto view = arr.mutable_unchecked<2>();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) view(r, c) = m(r, c);
  }
  return arr;
}

py::array_t<double> from_vector(const Eigen::VectorXd& v) {
  py::array_t<double> arr(static_cast<py::ssize_t>(v.size()));
  auto view = arr.mutable_unchecked<1>();
  for (Eigen::Index i = 0; i < v.size(); ++i) view(i) = v[i];
  return arr;
}

DistanceFunctionSet to_functions(const std::vector<std::string>& names) {
  bool mn = false, mx = false, av = false;
  for (const std::string& n : names) {
    if (n == "min") {
      mn = true;
    } else if (n == "max") {
      mx = true;
    } else if (n == "ave") {
      av = true;
    } else {
      throw InvalidArgumentError("unknown distance function '" + n +
                                 "' (expected min, max, ave)");
    }
  }
  if (mn && mx && av) return DistanceFunctionSet::all();
  if (mn && mx) return DistanceFunctionSet{DistanceFn::min, DistanceFn::max};
  if (mn && av) return DistanceFunctionSet{DistanceFn::min, DistanceFn::ave};
  if (mx && av) return DistanceFunctionSet{DistanceFn::max, DistanceFn::ave};
  if (mn) return DistanceFunctionSet{DistanceFn::min};
  if (mx) return DistanceFunctionSet{DistanceFn::max};
  if (av) return DistanceFunctionSet{DistanceFn::ave};
  throw InvalidArgumentError("at least one distance function is required");
}

PartLabel to_part(const std::string& name) {
  const auto part = part_from_name(name);
  if (!part) throw InvalidArgumentError("unknown part '" + name + "'");
  return *part;
}

std::map<PartLabel, PointSet2D> to_part_sets(
    const std::map<std::string, DoubleArray>& sets) {
  std::map<PartLabel, PointSet2D> out;
  for (const auto& [name, arr] : sets) {
    out.emplace(to_part(name), to_points(arr, name.c_str()));
  }
  return out;
}

std::map<PartLabel, DescriptorTensor> part_descriptors(
    const std::map<PartLabel, PointSet2D>& sets, const AnchorGrid& anchors,
    const DistanceFunctionSet& fns) {
  std::map<PartLabel, DescriptorTensor> out;
  for (const auto& [part, set] : sets) {
    if (set.points.empty()) continue;
    out.emplace(part, compute_descriptor(set, anchors, fns));
  }
  return out;
}

PartWeights to_weights(const std::map<std::string, double>& weights) {
  if (weights.empty()) return default_part_weights();
  PartWeights out = default_part_weights();
  for (const auto& [name, w] : weights) out[to_part(name)] = w;
  return out;
}

PartMask to_mask(const py::array& arr) {
  const auto a =
      py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>(
          arr);
  if (a.ndim() != 2) {
    throw InvalidArgumentError("mask must be an (H, W) array");
  }
  PartMask mask = PartMask::zeros(static_cast<int>(a.shape(1)),
                                  static_cast<int>(a.shape(0)));
  const auto view = a.unchecked<2>();
  for (py::ssize_t y = 0; y < view.shape(0); ++y) {
    for (py::ssize_t x = 0; x < view.shape(1); ++x) {
      if (view(y, x) != 0) {
        mask.bits[static_cast<std::size_t>(y) *
                      static_cast<std::size_t>(mask.width) +
                  static_cast<std::size_t>(x)] = 1;
      }
    }
  }
  return mask;
}

const std::vector<std::string> kAllFunctionNames = {"min", "max", "ave"};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Part re-projection distance shape fitting (C++ core bindings)";
  m.attr("__version__") = "0.1.0";
  m.attr("PART_NAMES") = [] {
    std::vector<std::string> names;
    for (PartLabel p : kAllParts) names.emplace_back(part_name(p));
    return names;
  }();

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const FormatError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  m.def(
      "distance_descriptor",
      [](const DoubleArray& points, const DoubleArray& anchors,
         const std::vector<std::string>& functions) {
        const PointSet2D set = to_points(points, "points");
        const AnchorGrid grid =
            AnchorGrid::from_points(to_points(anchors, "anchors"));
        const DescriptorTensor desc =
            compute_descriptor(set, grid, to_functions(functions));
        return from_matrix(desc.values);
      },
      py::arg("points"), py::arg("anchors"),
      py::arg("functions") = kAllFunctionNames,
      "Distance-field descriptor of a point set: one row per anchor, one "
      "column per function in canonical (min, max, ave) order.");

  m.def(
      "reprojection_loss",
      [](const std::map<std::string, DoubleArray>& pred,
         const std::map<std::string, DoubleArray>& target,
         const DoubleArray& anchors, int height, int width,
         const std::vector<std::string>& functions,
         const std::map<std::string, double>& weights) {
        const AnchorGrid grid =
            AnchorGrid::from_points(to_points(anchors, "anchors"));
        const DistanceFunctionSet fns = to_functions(functions);
        const auto pred_desc =
            part_descriptors(to_part_sets(pred), grid, fns);
        const auto target_desc =
            part_descriptors(to_part_sets(target), grid, fns);
        return prdl_loss(pred_desc, target_desc, to_weights(weights), height,
                         width);
      },
      py::arg("pred"), py::arg("target"), py::arg("anchors"),
      py::arg("height"), py::arg("width"),
      py::arg("functions") = kAllFunctionNames,
      py::arg("weights") = std::map<std::string, double>{},
      "Weighted squared descriptor mismatch between per-part predicted and "
      "target point sets, normalized by the image area.");

  m.def(
      "reprojection_gradient",
      [](const std::map<std::string, DoubleArray>& pred,
         const std::map<std::string, DoubleArray>& target,
         const DoubleArray& anchors, int height, int width,
         const std::vector<std::string>& functions,
         const std::map<std::string, double>& weights, double epsilon) {
        const AnchorGrid grid =
            AnchorGrid::from_points(to_points(anchors, "anchors"));
        const DistanceFunctionSet fns = to_functions(functions);
        const auto pred_sets = to_part_sets(pred);
        const auto target_desc =
            part_descriptors(to_part_sets(target), grid, fns);
        const PrdlGradient g =
            prdl_gradient(pred_sets, target_desc, grid, fns,
                          to_weights(weights), height, width, epsilon);
        std::map<std::string, py::array_t<double>> grads;
        for (const auto& [part, vec] : g.point_gradients) {
          grads.emplace(std::string(part_name(part)), from_points(vec));
        }
        return py::make_tuple(g.loss, grads);
      },
      py::arg("pred"), py::arg("target"), py::arg("anchors"),
      py::arg("height"), py::arg("width"),
      py::arg("functions") = kAllFunctionNames,
      py::arg("weights") = std::map<std::string, double>{},
      py::arg("epsilon") = 1e-6,
      "Loss and analytic d(loss)/d(point) for every predicted point, keyed "
      "by part name.");

  m.def(
      "chamfer_loss",
      [](const DoubleArray& pred, const DoubleArray& target) {
        const PointLoss r = chamfer_loss(to_points(pred, "pred"),
                                         to_points(target, "target"));
        return py::make_tuple(r.loss, from_points(r.gradient));
      },
      py::arg("pred"), py::arg("target"),
      "Bidirectional mean squared nearest-neighbor loss and its gradient "
      "on the predicted points.");

  m.def(
      "nn_directed_loss",
      [](const DoubleArray& from, const DoubleArray& to) {
        const DirectedNNLoss r =
            nn_loss_directed(to_points(from, "from_"), to_points(to, "to"));
        return py::make_tuple(r.loss, from_points(r.grad_from),
                              from_points(r.grad_to));
      },
      py::arg("from_"), py::arg("to"),
      "One-directional mean squared nearest-neighbor loss with gradients "
      "on both sets.");

  m.def(
      "soft_silhouette_loss",
      [](const DoubleArray& pred, const py::array& mask, double sigma) {
        SoftSilhouetteConfig cfg;
        cfg.sigma = sigma;
        const PointLoss r =
            soft_silhouette_iou_loss(to_points(pred, "pred"), to_mask(mask),
                                     cfg);
        return py::make_tuple(r.loss, from_points(r.gradient));
      },
      py::arg("pred"), py::arg("mask"), py::arg("sigma") = 1.5,
      "1 - soft IoU between a kernel-splatted point set and a binary mask, "
      "with the gradient on the points.");

  m.def(
      "make_toy",
      [](std::uint64_t seed, int n_vertices, int id_dims, int exp_dims) {
        const ToyModel toy = gen_toy_model(seed, n_vertices, id_dims,
                                           exp_dims);
        py::dict parts;
        for (PartLabel p : kAllParts) {
          parts[py::str(std::string(part_name(p)))] =
              toy.model.part_indices(p);
        }
        py::dict gt;
        gt["id"] = from_vector(toy.ground_truth.id);
        gt["exp"] = from_vector(toy.ground_truth.exp);
        gt["angles"] = from_vector(toy.ground_truth.angles);
        gt["translation"] = from_vector(toy.ground_truth.translation);
        py::dict out;
        out["mean_shape"] = from_matrix(toy.model.mean_shape);
        out["identity_basis"] = from_matrix(toy.model.identity_basis);
        out["expression_basis"] = from_matrix(toy.model.expression_basis);
        out["parts"] = parts;
        out["landmarks"] = toy.model.landmark_indices;
        out["ground_truth"] = gt;
        out["image_size"] = py::make_tuple(kToyImageWidth, kToyImageHeight);
        return out;
      },
      py::arg("seed"), py::arg("n_vertices") = 600, py::arg("id_dims") = 8,
      py::arg("exp_dims") = 6,
      "Deterministic synthetic face: blendshape model, per-part vertex "
      "lists, landmark indices, and the ground-truth parameters.");

  m.def(
      "toy_recovery",
      [](std::uint64_t seed, int max_iters) {
        Scenario s = toy_recovery_scenario(seed);
        if (max_iters > 0) s.config.max_iters = max_iters;
        const FitReport report = run_scenario(s, LossKind::prdl);
        Eigen::MatrixXd curve(static_cast<Eigen::Index>(report.curve.size()),
                              4);
        for (std::size_t i = 0; i < report.curve.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          curve(r, 0) = report.curve[i].prdl;
          curve(r, 1) = report.curve[i].landmark;
          curve(r, 2) = report.curve[i].regularization;
          curve(r, 3) = report.curve[i].total;
        }
        py::dict part_iou;
        for (const auto& [part, value] : report.part_iou) {
          part_iou[py::str(std::string(part_name(part)))] = value;
        }
        py::dict out;
        out["mean_iou"] = report.mean_iou;
        out["part_iou"] = part_iou;
        out["iterations"] = report.iterations;
        out["termination"] = report.termination;
        out["curve"] = from_matrix(curve);
        out["final_params"] = from_vector(report.final_params.flatten());
        return out;
      },
      py::arg("seed"), py::arg("max_iters") = 0,
      "Full pipeline smoke: rasterize a toy face's parts at the ground "
      "truth, fit from zeros with the re-projection loss, report IoU. "
      "max_iters=0 keeps the scenario default budget.");

  m.def(
      "check_gradients",
      [](int instances, std::uint64_t seed, double tolerance) {
        const GradCheckReport report =
            run_grad_checks(instances, seed, tolerance);
        py::list rows;
        for (const GradCheckRow& row : report.rows) {
          py::dict r;
          r["op"] = row.op;
          r["instances"] = row.instances;
          r["max_rel_err"] = row.max_rel_err;
          r["pass"] = row.pass;
          rows.append(r);
        }
        py::dict out;
        out["all_pass"] = report.all_pass;
        out["tolerance"] = report.tolerance;
        out["rows"] = rows;
        return out;
      },
      py::arg("instances") = 20, py::arg("seed") = 7,
      py::arg("tolerance") = 1e-5,
      "Central finite-difference verification of every analytic gradient "
      "in the library.");
}
