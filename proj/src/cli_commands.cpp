#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "partfit/cli.hpp"
#include "partfit/errors.hpp"
#include "partfit/gradcheck.hpp"
#include "partfit/image_io.hpp"
#include "partfit/metrics.hpp"
#include "partfit/model_io.hpp"
#include "partfit/svg.hpp"
#include "partfit/toy.hpp"

namespace partfit::cli {

namespace fs = std::filesystem;

namespace {

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw IoError("file not found: " + path);
}

void make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

Manifest manifest_for(const std::optional<std::string>& path,
                      const GrayImage& img) {
  if (path) {
    require_file(*path);
    return load_manifest(*path);
  }
  Manifest m;
  m.width = img.width;
  m.height = img.height;
  return m;
}

// ---------------------------------------------------------------- gen-toy

struct GenToyOptions {
  std::uint64_t seed = 0;
  std::string out;
  int vertices = 600;
  int id_dims = 8;
  int exp_dims = 6;
  int splat_radius = 1;
};

int cmd_gen_toy(const GenToyOptions& opt) {
  const ToyModel toy = gen_toy_model(opt.seed, opt.vertices, opt.id_dims,
                                     opt.exp_dims);
  const Camera camera = toy_camera();
  make_out_dir(opt.out);
  const fs::path dir(opt.out);

  write_model(dir / "model.txt", toy.model);
  write_params(dir / "gt_params.json", toy.ground_truth);

  GrayImage labels = GrayImage::zeros(kToyImageWidth, kToyImageHeight);
  for (PartLabel part : kAllParts) {
    const PointSet2D pts =
        part_points(toy.model, camera, toy.ground_truth, part);
    const PartMask mask = rasterize_points(pts, kToyImageHeight,
                                           kToyImageWidth, opt.splat_radius);
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        if (mask.at(x, y) && labels.at(x, y) == kBackgroundCode) {
          labels.at(x, y) = static_cast<std::uint8_t>(part_code(part));
        }
      }
    }
  }
  write_png((dir / "labels.png").string(), labels);

  const Eigen::Matrix2Xd projected =
      project_matrix(camera, assemble_vertices(toy.model, toy.ground_truth));
  LandmarkSet lms;
  for (int idx : toy.model.landmark_indices) {
    lms.landmarks.push_back({idx, projected(0, idx), projected(1, idx)});
  }
  write_landmarks((dir / "landmarks.txt").string(), lms);

  Manifest manifest;
  manifest.width = kToyImageWidth;
  manifest.height = kToyImageHeight;
  write_manifest((dir / "manifest.txt").string(), manifest);

  nlohmann::ordered_json run;
  run["format"] = "partfit-gen-toy";
  run["version"] = 1;
  run["seed"] = opt.seed;
  run["n_vertices"] = opt.vertices;
  run["id_dims"] = opt.id_dims;
  run["exp_dims"] = opt.exp_dims;
  run["splat_radius"] = opt.splat_radius;
  run["image"] = {{"width", kToyImageWidth}, {"height", kToyImageHeight}};
  run["files"] = {{"model", "model.txt"},
                  {"ground_truth", "gt_params.json"},
                  {"labels", "labels.png"},
                  {"landmarks", "landmarks.txt"},
                  {"manifest", "manifest.txt"}};
  write_text_file((dir / "run.json").string(), run.dump(2) + "\n");

  std::cout << "toy bundle (seed " << opt.seed << ") written to " << opt.out
            << ": model.txt gt_params.json labels.png landmarks.txt"
            << " manifest.txt run.json\n";
  return 0;
}

// -------------------------------------------------------------------- fit

struct FitOptions {
  std::string model;
  std::string labels;
  std::string out;
  std::optional<std::string> landmarks;
  std::optional<std::string> manifest;
  std::optional<std::string> config;
  std::optional<std::string> init;
  std::optional<std::uint64_t> seed;
  std::string weights_preset = "default";
  bool svg = false;
  bool dump = false;
};

RunConfig effective_config(const std::optional<std::string>& config_path,
                           const std::optional<std::uint64_t>& seed,
                           const std::string& weights_preset) {
  RunConfig cfg;
  if (config_path) {
    require_file(*config_path);
    cfg = load_run_config(*config_path).values;
  }
  if (weights_preset == "prdl-only") cfg.weights.landmark = 0.0;
  if (seed) cfg.fit.seed = *seed;
  return cfg;
}

int cmd_fit(const FitOptions& opt) {
  RunConfig cfg = effective_config(opt.config, opt.seed, opt.weights_preset);
  if (opt.dump) {
    std::cout << dump_run_config(cfg);
    return 0;
  }
  if (opt.model.empty() || opt.labels.empty() || opt.out.empty()) {
    throw InvalidArgumentError("fit requires --model, --labels and --out");
  }
  require_file(opt.model);
  require_file(opt.labels);
  if (opt.landmarks) require_file(*opt.landmarks);
  if (opt.init) require_file(*opt.init);

  const BlendshapeModel model = read_model(opt.model);
  const GrayImage img = read_gray_image(opt.labels);
  const Manifest manifest = manifest_for(opt.manifest, img);
  const PartPointSets raw = split_label_image(img, manifest);
  const PartPointSets targets = ingest_label_image(img, manifest, cfg.ingest);
  const LandmarkSet lms =
      opt.landmarks ? load_landmarks(*opt.landmarks) : LandmarkSet{};
  std::optional<ShapeParams> init;
  if (opt.init) init = read_params(*opt.init);

  FitReport report =
      fit(model, cfg.camera, targets, lms, cfg.weights, cfg.fit, init);

  // Score the fitted shape against the label map itself (raw pixels, not
  // the cleaned point sets the loss saw).
  std::map<PartLabel, PartMask> gt_masks;
  for (PartLabel p : kAllParts) {
    gt_masks.emplace(p, points_to_mask(raw.at(p), img.height, img.width));
  }
  const TargetContext ctx = TargetContext::from_targets(targets);
  const IoUReport iou =
      part_iou_report(model, cfg.camera, report.final_params, gt_masks,
                      cfg.splat_radius, cfg.fit.filters, &ctx);
  report.part_iou = iou.per_part;
  report.mean_iou = iou.mean_iou;

  make_out_dir(opt.out);
  const fs::path dir(opt.out);
  write_fit_report_json((dir / "report.json").string(), report);
  write_loss_curve_csv((dir / "curve.csv").string(), report);
  write_params(dir / "params.json", report.final_params);
  write_text_file((dir / "config.txt").string(), dump_run_config(cfg));

  if (opt.svg) {
    std::map<PartLabel, PointSet2D> predicted;
    for (PartLabel p : kAllParts) {
      predicted[p] = part_points(model, cfg.camera, report.final_params, p,
                                 cfg.fit.filters, &ctx);
    }
    write_text_file(
        (dir / "overlay.svg").string(),
        svg_fit_overlay(gt_masks, predicted, img.width, img.height));
    std::vector<CurveSeries> series(4);
    series[0].label = "total";
    series[1].label = "reprojection";
    series[2].label = "landmark";
    series[3].label = "regularization";
    for (const LossRow& row : report.curve) {
      series[0].values.push_back(row.total);
      series[1].values.push_back(row.prdl);
      series[2].values.push_back(row.landmark);
      series[3].values.push_back(row.regularization);
    }
    write_text_file((dir / "curves.svg").string(),
                    svg_loss_curves(series, "fit loss"));
  }

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "termination=%s iterations=%d final_total=%.6g mean_iou=%.4f\n",
                report.termination.c_str(), report.iterations,
                report.curve.empty() ? 0.0 : report.curve.back().total,
                report.mean_iou);
  std::cout << buf << "artifacts in " << opt.out << "\n";
  return report.termination == "nan_abort" ? 2 : 0;
}

// ------------------------------------------------------------- grad-check

struct GradCheckOptions {
  int trials = 100;
  std::uint64_t seed = 7;
  double tolerance = 1e-5;
  std::string flip;
  std::optional<std::string> json;
};

int cmd_grad_check(const GradCheckOptions& opt) {
  const GradCheckReport report =
      run_grad_checks(opt.trials, opt.seed, opt.tolerance, opt.flip);
  std::cout << format_grad_check_report(report);
  if (opt.json) write_grad_check_json(*opt.json, report, opt.seed);
  return report.all_pass ? 0 : 2;
}

// ------------------------------------------------------- compare / ablate

struct ExperimentOptions {
  std::string scenario;
  std::string out;
  int jobs = 1;
  bool svg = false;
};

// Runs `body(i)` for i in [0, count) on `jobs` workers; the first exception
// wins and rethrows on the caller.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count && !failed;
         i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                              count);
  pool.reserve(n);
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void write_comparison_summary(const std::string& csv_path,
                              const std::string& json_path,
                              const ExperimentSpec& spec,
                              const std::vector<ComparisonTable>& tables) {
  const std::size_t losses = spec.losses.size();
  std::vector<double> sums(losses, 0.0);
  for (const ComparisonTable& t : tables) {
    for (std::size_t j = 0; j < losses; ++j) sums[j] += t.rows[j].mean_iou;
  }
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << "loss,mean_iou,runs\n";
  char buf[96];
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < losses; ++j) {
    const double mean = sums[j] / static_cast<double>(tables.size());
    std::snprintf(buf, sizeof(buf), "%.17g", mean);
    csv << loss_kind_name(spec.losses[j]) << "," << buf << ","
        << tables.size() << "\n";
    nlohmann::ordered_json row;
    row["loss"] = std::string(loss_kind_name(spec.losses[j]));
    row["mean_iou"] = mean;
    row["runs"] = tables.size();
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json doc;
  doc["format"] = "partfit-comparison-summary";
  doc["version"] = 1;
  doc["scenario"] = spec.kind;
  doc["seeds"] = spec.seeds;
  doc["rows"] = std::move(rows);
  write_text_file(json_path, doc.dump(2) + "\n");
}

int cmd_compare(const ExperimentOptions& opt) {
  require_file(opt.scenario);
  const ExperimentSpec spec = load_experiment(opt.scenario);
  make_out_dir(opt.out);
  const fs::path dir(opt.out);

  std::vector<ComparisonTable> tables(spec.seeds.size());
  parallel_for(spec.seeds.size(), opt.jobs, [&](std::size_t i) {
    const Scenario s = build_scenario(spec, spec.seeds[i]);
    tables[i] = run_loss_comparison(s, spec.losses);
  });

  for (std::size_t i = 0; i < tables.size(); ++i) {
    const std::string stem = "comparison_seed" + std::to_string(spec.seeds[i]);
    write_comparison_csv((dir / (stem + ".csv")).string(), tables[i]);
    write_comparison_json((dir / (stem + ".json")).string(), tables[i]);
    if (opt.svg) {
      std::vector<CurveSeries> series;
      for (const ComparisonRow& row : tables[i].rows) {
        CurveSeries s;
        s.label = row.loss;
        for (const LossRow& r : row.curve) s.values.push_back(r.total);
        series.push_back(std::move(s));
      }
      write_text_file((dir / (stem + ".svg")).string(),
                      svg_loss_curves(series, tables[i].scenario));
    }
    for (const ComparisonRow& row : tables[i].rows) {
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "seed=%llu loss=%s mean_iou=%.4f termination=%s\n",
                    static_cast<unsigned long long>(spec.seeds[i]),
                    row.loss.c_str(), row.mean_iou, row.termination.c_str());
      std::cout << buf;
    }
  }
  write_comparison_summary((dir / "comparison_mean.csv").string(),
                           (dir / "comparison_mean.json").string(), spec,
                           tables);
  std::cout << "tables in " << opt.out << "\n";
  return 0;
}

int cmd_ablate(const ExperimentOptions& opt) {
  require_file(opt.scenario);
  const ExperimentSpec spec = load_experiment(opt.scenario);
  make_out_dir(opt.out);
  const fs::path dir(opt.out);

  std::vector<Scenario> battery;
  battery.reserve(spec.seeds.size());
  for (std::uint64_t seed : spec.seeds) {
    battery.push_back(build_scenario(spec, seed));
  }
  const AblationTable table = run_distance_ablation(battery, opt.jobs);
  write_ablation_csv((dir / "ablation.csv").string(), table);
  write_ablation_json((dir / "ablation.json").string(), table);
  for (const AblationRow& row : table.rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "functions=%-12s mean_iou=%.4f min_iou=%.4f runs=%d\n",
                  row.functions.c_str(), row.mean_iou, row.min_iou, row.runs);
    std::cout << buf;
  }
  std::cout << "tables in " << opt.out << "\n";
  return 0;
}

// --------------------------------------------------------------- annotate

struct AnnotateOptions {
  std::string model;
  std::string labels;
  std::string out;
  std::optional<std::string> manifest;
  std::optional<std::string> params;
  std::optional<std::string> config;
  int k = 1;
};

int cmd_annotate(const AnnotateOptions& opt) {
  RunConfig cfg = effective_config(opt.config, std::nullopt, "default");
  require_file(opt.model);
  require_file(opt.labels);
  if (opt.params) require_file(*opt.params);

  const BlendshapeModel model = read_model(opt.model);
  const GrayImage img = read_gray_image(opt.labels);
  const Manifest manifest = manifest_for(opt.manifest, img);
  const PartPointSets targets = ingest_label_image(img, manifest, cfg.ingest);
  const ShapeParams params =
      opt.params ? read_params(*opt.params) : ShapeParams::zero(model);

  const auto annotation =
      annotate_parts(model, cfg.camera, params, targets, opt.k);
  write_annotation(opt.out, annotation);
  for (PartLabel p : kAllParts) {
    const auto it = annotation.find(p);
    std::cout << part_name(p) << ": "
              << (it == annotation.end() ? 0 : it->second.size())
              << " vertices\n";
  }
  std::cout << "annotation written to " << opt.out << "\n";
  return 0;
}

// ------------------------------------------------------------- descriptor

struct DescriptorOptions {
  std::string labels;
  std::string part;
  std::string out;  // path prefix
  std::optional<std::string> manifest;
  std::string fn = "all";
  std::string format = "png";
};

int cmd_descriptor(const DescriptorOptions& opt) {
  require_file(opt.labels);
  const GrayImage img = read_gray_image(opt.labels);
  const Manifest manifest = manifest_for(opt.manifest, img);
  const PartPointSets raw = split_label_image(img, manifest);
  const auto part = part_from_name(opt.part);
  if (!part) throw InvalidArgumentError("unknown part '" + opt.part + "'");
  const PointSet2D& set = raw.at(*part);
  if (set.points.empty()) {
    throw InvalidArgumentError("part '" + opt.part + "' is empty in " +
                               opt.labels);
  }

  DistanceFunctionSet fns = DistanceFunctionSet::all();
  if (opt.fn == "min") fns = DistanceFunctionSet{DistanceFn::min};
  if (opt.fn == "max") fns = DistanceFunctionSet{DistanceFn::max};
  if (opt.fn == "ave") fns = DistanceFunctionSet{DistanceFn::ave};

  const fs::path parent = fs::path(opt.out).parent_path();
  if (!parent.empty()) make_out_dir(parent.string());

  const AnchorGrid anchors = AnchorGrid::lattice(img.width, img.height);
  const DescriptorTensor desc = compute_descriptor(set, anchors, fns);

  for (DistanceFn f : fns.functions()) {
    const int col = fns.column(f);
    const auto column = desc.values.col(col);
    const double lo = column.minCoeff();
    const double hi = column.maxCoeff();
    GrayImage out_img = GrayImage::zeros(img.width, img.height);
    if (hi - lo > 1e-12) {
      for (Eigen::Index i = 0; i < column.size(); ++i) {
        const double t = (column[i] - lo) / (hi - lo);
        out_img.pixels[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(std::lround(t * 255.0));
      }
    }
    const std::string path =
        opt.out + "-" + distance_fn_name(f) + "." + opt.format;
    if (opt.format == "png") {
      write_png(path, out_img);
    } else {
      write_pgm(path, out_img);
    }
    std::cout << "descriptor field written to " << path << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"part re-projection distance shape fitting toolkit"};
  app.require_subcommand(0, 1);
  bool dump_defaults = false;
  app.add_flag("--dump-config", dump_defaults,
               "print the default configuration and exit");

  GenToyOptions gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-toy", "generate a synthetic face bundle");
  gen_cmd->add_option("--seed", gen.seed, "rng seed")->required();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--vertices", gen.vertices, "vertex count");
  gen_cmd->add_option("--id-dims", gen.id_dims, "identity basis size");
  gen_cmd->add_option("--exp-dims", gen.exp_dims, "expression basis size");
  gen_cmd->add_option("--splat-radius", gen.splat_radius,
                      "label map splat radius");

  FitOptions fit_opt;
  CLI::App* fit_cmd =
      app.add_subcommand("fit", "fit shape parameters to a label map");
  fit_cmd->add_option("--model", fit_opt.model, "model container");
  fit_cmd->add_option("--labels", fit_opt.labels, "part label map");
  fit_cmd->add_option("--out", fit_opt.out, "output directory");
  fit_cmd->add_option("--landmarks", fit_opt.landmarks, "landmark file");
  fit_cmd->add_option("--manifest", fit_opt.manifest, "label map manifest");
  fit_cmd->add_option("--config", fit_opt.config, "configuration file");
  fit_cmd->add_option("--init", fit_opt.init, "initial parameters (JSON)");
  fit_cmd->add_option("--seed", fit_opt.seed, "seed echoed into artifacts");
  fit_cmd->add_option("--weights", fit_opt.weights_preset, "weight preset")
      ->check(CLI::IsMember({"default", "prdl-only"}));
  fit_cmd->add_flag("--svg", fit_opt.svg, "emit overlay and curve SVGs");
  fit_cmd->add_flag("--dump-config", fit_opt.dump,
                    "print the effective configuration and exit");

  GradCheckOptions gc;
  CLI::App* gc_cmd = app.add_subcommand(
      "grad-check", "finite-difference verification of analytic gradients");
  gc_cmd->add_option("--trials", gc.trials, "instances per operation");
  gc_cmd->add_option("--seed", gc.seed, "rng seed");
  gc_cmd->add_option("--tolerance", gc.tolerance, "max relative error");
  gc_cmd->add_option("--flip", gc.flip,
                     "negate one op's analytic gradient (self-test)");
  gc_cmd->add_option("--json", gc.json, "also write a JSON report");

  ExperimentOptions cmp;
  CLI::App* cmp_cmd = app.add_subcommand(
      "compare", "fit one scenario under several losses and tabulate");
  cmp_cmd->add_option("--scenario", cmp.scenario, "experiment file")
      ->required();
  cmp_cmd->add_option("--out", cmp.out, "output directory")->required();
  cmp_cmd->add_option("--jobs", cmp.jobs, "worker threads")
      ->check(CLI::PositiveNumber);
  cmp_cmd->add_flag("--svg", cmp.svg, "emit per-seed loss curve SVGs");

  ExperimentOptions abl;
  CLI::App* abl_cmd = app.add_subcommand(
      "ablate", "re-fit a battery under each distance-function subset");
  abl_cmd->add_option("--scenario", abl.scenario, "experiment file")
      ->required();
  abl_cmd->add_option("--out", abl.out, "output directory")->required();
  abl_cmd->add_option("--jobs", abl.jobs, "worker threads")
      ->check(CLI::PositiveNumber);

  AnnotateOptions ann;
  CLI::App* ann_cmd = app.add_subcommand(
      "annotate", "transfer label map parts onto model vertices");
  ann_cmd->add_option("--model", ann.model, "model container")->required();
  ann_cmd->add_option("--labels", ann.labels, "part label map")->required();
  ann_cmd->add_option("--out", ann.out, "annotation output file")->required();
  ann_cmd->add_option("--manifest", ann.manifest, "label map manifest");
  ann_cmd->add_option("--params", ann.params, "projection parameters (JSON)");
  ann_cmd->add_option("--config", ann.config, "configuration file");
  ann_cmd->add_option("--k", ann.k, "votes per target point")
      ->check(CLI::PositiveNumber);

  DescriptorOptions desc;
  CLI::App* desc_cmd = app.add_subcommand(
      "descriptor", "export a part's distance-field descriptor as images");
  desc_cmd->add_option("--labels", desc.labels, "part label map")->required();
  desc_cmd->add_option("--part", desc.part, "part name")->required();
  desc_cmd->add_option("--out", desc.out, "output path prefix")->required();
  desc_cmd->add_option("--manifest", desc.manifest, "label map manifest");
  desc_cmd->add_option("--fn", desc.fn, "distance function")
      ->check(CLI::IsMember({"min", "max", "ave", "all"}));
  desc_cmd->add_option("--format", desc.format, "image format")
      ->check(CLI::IsMember({"png", "pgm"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_toy(gen);
    if (fit_cmd->parsed()) return cmd_fit(fit_opt);
    if (gc_cmd->parsed()) return cmd_grad_check(gc);
    if (cmp_cmd->parsed()) return cmd_compare(cmp);
    if (abl_cmd->parsed()) return cmd_ablate(abl);
    if (ann_cmd->parsed()) return cmd_annotate(ann);
    if (desc_cmd->parsed()) return cmd_descriptor(desc);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (dump_defaults) {
    std::cout << dump_run_config(RunConfig{});
    return 0;
  }
  std::cout << app.help();
  return 1;
}

}  // namespace partfit::cli
