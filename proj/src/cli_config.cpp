#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "partfit/cli.hpp"
#include "partfit/errors.hpp"

namespace partfit::cli {

namespace {

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError("expected a number, got '" + s + "'");
  }
  if (used != s.size()) throw FormatError("trailing junk in number '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("expected an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw FormatError("expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw FormatError("empty entry in list '" + s + "'");
    out.push_back(item);
  }
  if (out.empty()) throw FormatError("empty list");
  return out;
}

DistanceFunctionSet parse_functions(const std::string& s) {
  bool has_min = false, has_max = false, has_ave = false;
  for (const std::string& name : split_list(s)) {
    if (name == "min") {
      has_min = true;
    } else if (name == "max") {
      has_max = true;
    } else if (name == "ave") {
      has_ave = true;
    } else {
      throw FormatError("unknown distance function '" + name + "'");
    }
  }
  std::vector<DistanceFn> fns;
  if (has_min) fns.push_back(DistanceFn::min);
  if (has_max) fns.push_back(DistanceFn::max);
  if (has_ave) fns.push_back(DistanceFn::ave);
  switch (fns.size()) {
    case 1:
      return DistanceFunctionSet{fns[0]};
    case 2:
      return DistanceFunctionSet{fns[0], fns[1]};
    default:
      return DistanceFunctionSet::all();
  }
}

std::string format_functions(const DistanceFunctionSet& fns) {
  std::string out;
  for (DistanceFn f : fns.functions()) {
    if (!out.empty()) out += ",";
    out += distance_fn_name(f);
  }
  return out;
}

struct KeyHandler {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PARTFIT_DBL(section, key, expr)                                     \
  KeyHandler {                                                              \
    section, key,                                                           \
        [](RunConfig& c, const std::string& v) { (expr) = parse_double(v); }, \
        [](const RunConfig& cc) {                                           \
          auto& c = const_cast<RunConfig&>(cc);                             \
          return fmt_double(expr);                                          \
        }                                                                   \
  }

#define PARTFIT_INT(section, key, expr)                                        \
  KeyHandler {                                                                 \
    section, key,                                                              \
        [](RunConfig& c, const std::string& v) {                               \
          (expr) = static_cast<int>(parse_int(v));                             \
        },                                                                     \
        [](const RunConfig& cc) {                                              \
          auto& c = const_cast<RunConfig&>(cc);                                \
          return std::to_string(expr);                                         \
        }                                                                      \
  }

#define PARTFIT_BOOL(section, key, expr)                                    \
  KeyHandler {                                                              \
    section, key,                                                           \
        [](RunConfig& c, const std::string& v) { (expr) = parse_bool(v); }, \
        [](const RunConfig& cc) {                                           \
          auto& c = const_cast<RunConfig&>(cc);                             \
          return (expr) ? "true" : "false";                                 \
        }                                                                   \
  }

const char* part_weight_key_name(PartLabel p) {
  static const std::array<std::string, 8> names = [] {
    std::array<std::string, 8> a;
    for (PartLabel q : kAllParts) {
      a[part_code(q) - 1] = "part_" + std::string(part_name(q));
    }
    return a;
  }();
  return names[part_code(p) - 1].c_str();
}

KeyHandler part_weight_key(PartLabel p) {
  return {"weights", part_weight_key_name(p),
          [p](RunConfig& c, const std::string& v) {
            c.weights.part_weights[p] = parse_double(v);
          },
          [p](const RunConfig& c) {
            const auto it = c.weights.part_weights.find(p);
            return fmt_double(it == c.weights.part_weights.end() ? 1.0
                                                                 : it->second);
          }};
}

std::vector<KeyHandler> make_schema() {
  std::vector<KeyHandler> s;
  s.push_back({"camera", "mode",
               [](RunConfig& c, const std::string& v) {
                 if (v == "orthographic") {
                   c.camera.mode = Camera::Mode::orthographic;
                 } else if (v == "weak_perspective") {
                   c.camera.mode = Camera::Mode::weak_perspective;
                 } else {
                   throw FormatError("unknown camera mode '" + v + "'");
                 }
               },
               [](const RunConfig& c) -> std::string {
                 return c.camera.mode == Camera::Mode::orthographic
                            ? "orthographic"
                            : "weak_perspective";
               }});
  s.push_back(PARTFIT_DBL("camera", "scale", c.camera.scale));
  s.push_back(PARTFIT_DBL("camera", "center_x", c.camera.cx));
  s.push_back(PARTFIT_DBL("camera", "center_y", c.camera.cy));
  s.push_back(PARTFIT_DBL("camera", "focal", c.camera.focal));
  s.push_back(PARTFIT_DBL("camera", "z_offset", c.camera.z_offset));

  s.push_back(PARTFIT_DBL("weights", "prdl", c.weights.prdl));
  s.push_back(PARTFIT_DBL("weights", "landmark", c.weights.landmark));
  s.push_back(PARTFIT_DBL("weights", "regularization", c.weights.regularization));
  s.push_back(PARTFIT_DBL("weights", "exp_reg_scale", c.weights.exp_reg_scale));
  for (PartLabel p : kAllParts) s.push_back(part_weight_key(p));

  s.push_back(PARTFIT_INT("optimizer", "max_iters", c.fit.max_iters));
  s.push_back(PARTFIT_DBL("optimizer", "learning_rate", c.fit.learning_rate));
  s.push_back(PARTFIT_DBL("optimizer", "beta1", c.fit.beta1));
  s.push_back(PARTFIT_DBL("optimizer", "beta2", c.fit.beta2));
  s.push_back(PARTFIT_DBL("optimizer", "adam_epsilon", c.fit.adam_epsilon));
  s.push_back(PARTFIT_DBL("optimizer", "tolerance", c.fit.tolerance));
  s.push_back(PARTFIT_INT("optimizer", "patience", c.fit.patience));
  s.push_back({"optimizer", "seed",
               [](RunConfig& c, const std::string& v) {
                 c.fit.seed = parse_u64(v);
               },
               [](const RunConfig& c) { return std::to_string(c.fit.seed); }});

  s.push_back(PARTFIT_INT("sampling", "anchor_count", c.fit.anchor_count));
  s.push_back(PARTFIT_INT("sampling", "anchor_start", c.fit.anchor_start));
  s.push_back(PARTFIT_INT("sampling", "skin_point_cap", c.fit.skin_point_cap));

  s.push_back(PARTFIT_DBL("prdl", "epsilon", c.fit.prdl_epsilon));
  s.push_back({"prdl", "functions",
               [](RunConfig& c, const std::string& v) {
                 c.fit.functions = parse_functions(v);
               },
               [](const RunConfig& c) { return format_functions(c.fit.functions); }});

  s.push_back(
      PARTFIT_DBL("filters", "visibility_slack", c.fit.filters.visibility_slack));
  s.push_back(PARTFIT_BOOL("filters", "eyebrow_cut", c.fit.filters.eyebrow_cut));
  s.push_back(
      PARTFIT_DBL("filters", "occlusion_radius", c.fit.filters.occlusion_radius));

  s.push_back(PARTFIT_INT("ingest", "min_area", c.ingest.min_area));
  s.push_back(PARTFIT_INT("ingest", "connectivity", c.ingest.connectivity));
  s.push_back(PARTFIT_BOOL("ingest", "forehead_cut", c.ingest.forehead_cut));

  s.push_back(PARTFIT_INT("bench", "splat_radius", c.splat_radius));
  s.push_back(PARTFIT_DBL("bench", "soft_sigma", c.soft_sigma));
  return s;
}

#undef PARTFIT_DBL
#undef PARTFIT_INT
#undef PARTFIT_BOOL

const std::vector<KeyHandler>& schema() {
  static const std::vector<KeyHandler> s = make_schema();
  return s;
}

const KeyHandler* find_key(const std::string& section, const std::string& key) {
  for (const KeyHandler& h : schema()) {
    if (section == h.section && key == h.key) return &h;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const KeyHandler& h : schema()) {
    if (section == h.section) return true;
  }
  return false;
}

[[noreturn]] void fail_at(const std::string& origin, int line,
                          const std::string& message) {
  throw FormatError(origin + ":" + std::to_string(line) + ": " + message);
}

// Shared `[section]` / `key = value` walker. The callback decides what a
// (section, key, value) triple means; this handles comments, blank lines,
// header syntax, and missing '='.
void walk_config(std::istream& in, const std::string& origin,
                 const std::function<bool(const std::string&)>& section_ok,
                 const std::function<void(const std::string& section,
                                          const std::string& key,
                                          const std::string& value,
                                          int line_no)>& on_key) {
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail_at(origin, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail_at(origin, line_no, "empty section name");
      if (!section_ok(section)) {
        fail_at(origin, line_no, "unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail_at(origin, line_no, "expected `key = value`, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail_at(origin, line_no, "missing key before '='");
    if (value.empty()) fail_at(origin, line_no, "missing value for '" + key + "'");
    if (section.empty()) {
      fail_at(origin, line_no, "key '" + key + "' appears before any [section]");
    }
    on_key(section, key, value, line_no);
  }
}

void set_key(ParsedConfig& out, const std::string& origin,
             const std::string& section, const std::string& key,
             const std::string& value, int line_no) {
  const KeyHandler* h = find_key(section, key);
  if (h == nullptr) {
    fail_at(origin, line_no, "unknown key '" + section + "." + key + "'");
  }
  try {
    h->set(out.values, value);
  } catch (const FormatError& e) {
    fail_at(origin, line_no, e.what());
  }
  out.present.insert(section + "." + key);
}

}  // namespace

ParsedConfig parse_run_config(std::istream& in, const std::string& origin) {
  ParsedConfig out;
  walk_config(in, origin, known_section,
              [&](const std::string& section, const std::string& key,
                  const std::string& value, int line_no) {
                set_key(out, origin, section, key, value, line_no);
              });
  return out;
}

ParsedConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("file not found: " + path);
  return parse_run_config(in, path);
}

std::string dump_run_config(const RunConfig& cfg) {
  std::string out = "# partfit configuration: `key = value` lines under"
                    " [section] headers; '#' comments.\n";
  std::string section;
  for (const KeyHandler& h : schema()) {
    if (section != h.section) {
      section = h.section;
      out += "\n[" + section + "]\n";
    }
    out += std::string(h.key) + " = " + h.get(cfg) + "\n";
  }
  return out;
}

namespace {

LossKind parse_loss_kind(const std::string& name) {
  for (LossKind k : kAllLossKinds) {
    if (name == loss_kind_name(k)) return k;
  }
  throw FormatError("unknown loss '" + name + "'");
}

constexpr const char* kScenarioKinds[] = {"toy-recovery", "displaced-disc",
                                          "two-cluster-decoy"};

}  // namespace

ExperimentSpec parse_experiment(std::istream& in, const std::string& origin) {
  ExperimentSpec spec;
  const auto section_ok = [](const std::string& s) {
    return s == "scenario" || (known_section(s) && s != "camera" && s != "ingest");
  };
  walk_config(
      in, origin, section_ok,
      [&](const std::string& section, const std::string& key,
          const std::string& value, int line_no) {
        if (section != "scenario") {
          if (section == "optimizer" && key == "seed") {
            fail_at(origin, line_no,
                    "optimizer.seed is not overridable; use scenario.seeds");
          }
          set_key(spec.overrides, origin, section, key, value, line_no);
          return;
        }
        try {
          if (key == "kind") {
            const auto* end = std::end(kScenarioKinds);
            if (std::find(std::begin(kScenarioKinds), end, value) == end) {
              throw FormatError("unknown scenario kind '" + value + "'");
            }
            spec.kind = value;
          } else if (key == "seeds") {
            spec.seeds.clear();
            for (const std::string& s : split_list(value)) {
              spec.seeds.push_back(parse_u64(s));
            }
          } else if (key == "n_vertices") {
            spec.n_vertices = static_cast<int>(parse_int(value));
            if (spec.n_vertices < 8) {
              throw FormatError("n_vertices must be at least 8");
            }
          } else if (key == "displacement_sigmas") {
            spec.displacement_sigmas = parse_double(value);
            if (spec.displacement_sigmas <= 0) {
              throw FormatError("displacement_sigmas must be positive");
            }
          } else if (key == "sigma") {
            spec.sigma = parse_double(value);
            if (spec.sigma <= 0) throw FormatError("sigma must be positive");
          } else if (key == "losses") {
            spec.losses.clear();
            for (const std::string& s : split_list(value)) {
              spec.losses.push_back(parse_loss_kind(s));
            }
          } else {
            throw FormatError("unknown key 'scenario." + key + "'");
          }
        } catch (const FormatError& e) {
          fail_at(origin, line_no, e.what());
        }
      });
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("file not found: " + path);
  return parse_experiment(in, path);
}

namespace {

void apply_overrides(Scenario& s, const ParsedConfig& o) {
  const RunConfig& v = o.values;
  for (const std::string& key : o.present) {
    if (key == "weights.prdl") {
      s.weights.prdl = v.weights.prdl;
    } else if (key == "weights.landmark") {
      s.weights.landmark = v.weights.landmark;
    } else if (key == "weights.regularization") {
      s.weights.regularization = v.weights.regularization;
    } else if (key == "weights.exp_reg_scale") {
      s.weights.exp_reg_scale = v.weights.exp_reg_scale;
    } else if (key.rfind("weights.part_", 0) == 0) {
      const auto part = part_from_name(key.substr(std::string("weights.part_").size()));
      s.weights.part_weights[*part] = v.weights.part_weights.at(*part);
    } else if (key == "optimizer.max_iters") {
      s.config.max_iters = v.fit.max_iters;
    } else if (key == "optimizer.learning_rate") {
      s.config.learning_rate = v.fit.learning_rate;
    } else if (key == "optimizer.beta1") {
      s.config.beta1 = v.fit.beta1;
    } else if (key == "optimizer.beta2") {
      s.config.beta2 = v.fit.beta2;
    } else if (key == "optimizer.adam_epsilon") {
      s.config.adam_epsilon = v.fit.adam_epsilon;
    } else if (key == "optimizer.tolerance") {
      s.config.tolerance = v.fit.tolerance;
    } else if (key == "optimizer.patience") {
      s.config.patience = v.fit.patience;
    } else if (key == "sampling.anchor_count") {
      s.config.anchor_count = v.fit.anchor_count;
    } else if (key == "sampling.anchor_start") {
      s.config.anchor_start = v.fit.anchor_start;
    } else if (key == "sampling.skin_point_cap") {
      s.config.skin_point_cap = v.fit.skin_point_cap;
    } else if (key == "prdl.epsilon") {
      s.config.prdl_epsilon = v.fit.prdl_epsilon;
    } else if (key == "prdl.functions") {
      s.config.functions = v.fit.functions;
    } else if (key == "filters.visibility_slack") {
      s.config.filters.visibility_slack = v.fit.filters.visibility_slack;
    } else if (key == "filters.eyebrow_cut") {
      s.config.filters.eyebrow_cut = v.fit.filters.eyebrow_cut;
    } else if (key == "filters.occlusion_radius") {
      s.config.filters.occlusion_radius = v.fit.filters.occlusion_radius;
    } else if (key == "bench.splat_radius") {
      s.splat_radius = v.splat_radius;
    } else if (key == "bench.soft_sigma") {
      s.soft_sigma = v.soft_sigma;
    }
  }
}

}  // namespace

Scenario build_scenario(const ExperimentSpec& spec, std::uint64_t seed) {
  Scenario s;
  if (spec.kind == "toy-recovery") {
    s = toy_recovery_scenario(seed, spec.n_vertices);
  } else if (spec.kind == "displaced-disc") {
    s = displaced_disc_scenario(spec.displacement_sigmas, spec.sigma);
    s.config.seed = seed;
  } else {
    s = two_cluster_decoy_scenario(seed);
  }
  apply_overrides(s, spec.overrides);
  return s;
}

}  // namespace partfit::cli
