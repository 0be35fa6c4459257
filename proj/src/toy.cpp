#include "partfit/toy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

constexpr double kGridPitch = 1.7;     // px between candidate vertices
constexpr double kJitterFrac = 0.07;   // of pitch, per coordinate
constexpr double kScale = 48.0;        // must match toy_camera()
constexpr double kCx = 64.0;
constexpr double kCy = 64.0;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

struct Ellipse {
  PartLabel part;
  double cx, cy;  // image px
  double ax, ay;  // half-axes, px
};

// Neutral layout. Worst-case inter-part gaps stay above 4.8 px after the
// per-seed jitter below, which exceeds twice the rasterization halo.
const Ellipse kLayout[] = {
    {PartLabel::left_eye, 37.0, 46.0, 9.5, 6.0},
    {PartLabel::right_eye, 91.0, 46.0, 9.5, 6.0},
    {PartLabel::left_eyebrow, 37.0, 27.0, 11.5, 4.25},
    {PartLabel::right_eyebrow, 91.0, 27.0, 11.5, 4.25},
    {PartLabel::up_lip, 64.0, 84.0, 16.0, 4.25},
    {PartLabel::down_lip, 64.0, 101.0, 16.0, 4.25},
    {PartLabel::nose, 64.0, 58.0, 8.0, 13.5},
    {PartLabel::skin, 64.0, 118.5, 32.0, 5.5},
};

struct Vertex {
  double x, y;  // image px
  PartLabel part;
  double local_u;  // (x - cx) / ax of its ellipse
};

// Candidate grid points inside the ellipse, jittered, ordered by normalized
// radius so trimming to a requested count shaves the outer ring.
std::vector<Vertex> sample_ellipse(const Ellipse& e, int count, double pitch,
                                   std::mt19937_64& rng) {
  struct Candidate {
    double rho2, x, y;
  };
  std::vector<Candidate> cands;
  double ox = uniform(rng, 0.0, pitch);
  double oy = uniform(rng, 0.0, pitch);
  double x0 = e.cx - e.ax, x1 = e.cx + e.ax;
  double y0 = e.cy - e.ay, y1 = e.cy + e.ay;
  double jit = kJitterFrac * pitch;
  for (double gy = std::floor((y0 - oy) / pitch) * pitch + oy; gy <= y1;
       gy += pitch) {
    for (double gx = std::floor((x0 - ox) / pitch) * pitch + ox; gx <= x1;
         gx += pitch) {
      double px = gx + uniform(rng, -jit, jit);
      double py = gy + uniform(rng, -jit, jit);
      double u = (px - e.cx) / e.ax, w = (py - e.cy) / e.ay;
      double rho2 = u * u + w * w;
      if (rho2 <= 1.0) cands.push_back({rho2, px, py});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a,
                                           const Candidate& b) {
    if (a.rho2 != b.rho2) return a.rho2 < b.rho2;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (static_cast<int>(cands.size()) > count) cands.resize(count);
  std::sort(cands.begin(), cands.end(), [](const Candidate& a,
                                           const Candidate& b) {
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<Vertex> out;
  out.reserve(cands.size());
  for (const Candidate& c : cands) {
    out.push_back({c.x, c.y, e.part, (c.x - e.cx) / e.ax});
  }
  return out;
}

// Image px -> model units (y up, origin at the principal point).
inline double to_model_x(double px) { return (px - kCx) / kScale; }
inline double to_model_y(double py) { return (kCy - py) / kScale; }

// Scales a basis column so its largest per-vertex displacement norm is 1.
// Columns that vanish (a localized field on an empty part at tiny vertex
// counts) fall back to a global wave so every column stays nontrivial.
void normalize_column(Eigen::MatrixXd& basis, int col,
                      const Eigen::Matrix3Xd& mean, double phase) {
  const int n = static_cast<int>(mean.cols());
  double max_norm = 0.0;
  for (int i = 0; i < n; ++i) {
    max_norm = std::max(max_norm, basis.col(col).segment(3 * i, 3).norm());
  }
  if (max_norm < 1e-9) {
    for (int i = 0; i < n; ++i) {
      basis(3 * i, col) = std::sin(phase + 2.0 * mean(0, i) + mean(1, i));
      basis(3 * i + 1, col) = std::cos(phase + mean(0, i));
    }
    max_norm = 0.0;
    for (int i = 0; i < n; ++i) {
      max_norm = std::max(max_norm, basis.col(col).segment(3 * i, 3).norm());
    }
  }
  basis.col(col) /= max_norm;
}

}  // namespace

Camera toy_camera() {
  Camera cam;
  cam.mode = Camera::Mode::orthographic;
  cam.scale = kScale;
  cam.cx = kCx;
  cam.cy = kCy;
  return cam;
}

ToyModel gen_toy_model(std::uint64_t seed, int n_vertices, int k_id,
                       int k_exp) {
  if (n_vertices < 1 || k_id < 1 || k_exp < 1) {
    throw InvalidArgumentError("toy model sizes must be at least 1");
  }
  std::mt19937_64 rng(seed);

  // Per-seed layout jitter, kept small enough to preserve the gap budget.
  std::array<Ellipse, 8> parts;
  double total_area = 0.0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    parts[p] = kLayout[p];
    parts[p].cx += uniform(rng, -1.0, 1.0);
    parts[p].cy += uniform(rng, -1.0, 1.0);
    parts[p].ax *= uniform(rng, 0.96, 1.04);
    parts[p].ay *= uniform(rng, 0.96, 1.04);
    total_area += parts[p].ax * parts[p].ay;  // pi dropped, ratios only
  }

  // Vertex quota per part: proportional to area, largest remainder.
  std::array<int, 8> quota{};
  {
    std::array<double, 8> exact{};
    int assigned = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      exact[p] = n_vertices * parts[p].ax * parts[p].ay / total_area;
      quota[p] = static_cast<int>(std::floor(exact[p]));
      assigned += quota[p];
    }
    std::array<int, 8> order{0, 1, 2, 3, 4, 5, 6, 7};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      double fa = exact[a] - std::floor(exact[a]);
      double fb = exact[b] - std::floor(exact[b]);
      if (fa != fb) return fa > fb;
      return a < b;
    });
    for (int i = 0; assigned < n_vertices; ++i) {
      quota[static_cast<std::size_t>(order[static_cast<std::size_t>(i % 8)])]++;
      ++assigned;
    }
  }

  // Sample each part, shrinking the grid pitch only if the quota demands a
  // density beyond the default (which would void the spacing guarantee).
  std::vector<Vertex> vertices;
  vertices.reserve(static_cast<std::size_t>(n_vertices));
  BlendshapeModel model;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    double pitch = kGridPitch;
    std::vector<Vertex> vs;
    for (int attempt = 0; attempt < 40; ++attempt) {
      std::mt19937_64 part_rng(rng());
      vs = sample_ellipse(parts[p], quota[p], pitch, part_rng);
      if (static_cast<int>(vs.size()) >= quota[p]) break;
      pitch *= 0.9;
    }
    if (static_cast<int>(vs.size()) < quota[p]) {
      throw InvalidArgumentError("toy layout cannot hold " +
                                 std::to_string(n_vertices) + " vertices");
    }
    int base = static_cast<int>(vertices.size());
    std::vector<int> ids(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
      ids[i] = base + static_cast<int>(i);
    }
    model.part_annotation[parts[p].part] = std::move(ids);
    vertices.insert(vertices.end(), vs.begin(), vs.end());
  }

  const int n = static_cast<int>(vertices.size());
  model.mean_shape.resize(3, n);
  for (int i = 0; i < n; ++i) {
    double X = to_model_x(vertices[static_cast<std::size_t>(i)].x);
    double Y = to_model_y(vertices[static_cast<std::size_t>(i)].y);
    model.mean_shape(0, i) = X;
    model.mean_shape(1, i) = Y;
    model.mean_shape(2, i) = 0.25 * std::exp(-(X * X + Y * Y) / 0.8);
  }

  // Landmarks: per part, the vertex nearest the ellipse center plus the
  // horizontal extremes; duplicates dropped.
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::vector<int>& ids = model.part_annotation[parts[p].part];
    if (ids.empty()) continue;
    int center = ids[0], lo = ids[0], hi = ids[0];
    double best = std::numeric_limits<double>::infinity();
    for (int i : ids) {
      const Vertex& v = vertices[static_cast<std::size_t>(i)];
      double d = std::hypot(v.x - parts[p].cx, v.y - parts[p].cy);
      if (d < best) {
        best = d;
        center = i;
      }
      if (v.x < vertices[static_cast<std::size_t>(lo)].x) lo = i;
      if (v.x > vertices[static_cast<std::size_t>(hi)].x) hi = i;
    }
    for (int cand : {center, lo, hi}) {
      if (std::find(model.landmark_indices.begin(),
                    model.landmark_indices.end(),
                    cand) == model.landmark_indices.end()) {
        model.landmark_indices.push_back(cand);
      }
    }
  }

  // Identity basis: smooth global deformation fields over model coords.
  model.identity_basis = Eigen::MatrixXd::Zero(3 * n, k_id);
  for (int j = 0; j < k_id; ++j) {
    double a1 = uniform(rng, 0.6, 2.4), b1 = uniform(rng, 0.6, 2.4);
    double c1 = uniform(rng, 0.0, 6.283185307179586);
    double a2 = uniform(rng, 0.6, 2.4), b2 = uniform(rng, 0.6, 2.4);
    double c2 = uniform(rng, 0.0, 6.283185307179586);
    for (int i = 0; i < n; ++i) {
      double X = model.mean_shape(0, i), Y = model.mean_shape(1, i);
      double dx = 0.0, dy = 0.0;
      switch (j) {
        case 0: dx = X; break;                                   // width
        case 1: dy = Y; break;                                   // height
        case 2: dx = Y; break;                                   // shear
        case 3: dx = X * Y; break;                               // taper
        case 4: dy = X * X; break;                               // bend
        case 5: dx = std::sin(2.1 * Y); break;                   // wave
        case 6: dy = std::cos(1.7 * X); break;                   // lift wave
        case 7: dx = X * X * X; dy = 0.4 * X * Y; break;         // warp
        default:
          dx = std::sin(a1 * X + b1 * Y + c1);
          dy = std::sin(a2 * X + b2 * Y + c2);
          break;
      }
      model.identity_basis(3 * i, j) = dx;
      model.identity_basis(3 * i + 1, j) = dy;
    }
    normalize_column(model.identity_basis, j, model.mean_shape,
                     0.7 * (j + 1));
  }

  // Expression basis: part-localized action fields.
  model.expression_basis = Eigen::MatrixXd::Zero(3 * n, k_exp);
  std::array<const Ellipse*, 8> by_part{};
  for (std::size_t p = 0; p < parts.size(); ++p) {
    by_part[static_cast<std::size_t>(part_code(parts[p].part) - 1)] =
        &parts[p];
  }
  for (int j = 0; j < k_exp; ++j) {
    double phase = uniform(rng, 0.0, 6.283185307179586);
    for (int i = 0; i < n; ++i) {
      const Vertex& v = vertices[static_cast<std::size_t>(i)];
      const Ellipse& e =
          *by_part[static_cast<std::size_t>(part_code(v.part) - 1)];
      double u = v.local_u;
      double w_loc = (v.y - e.cy) / e.ay;  // image y, +1 at bottom edge
      double dx = 0.0, dy = 0.0;
      switch (j) {
        case 0:  // eye close: squash eyes toward their own center line
          if (v.part == PartLabel::left_eye ||
              v.part == PartLabel::right_eye) {
            dy = w_loc;
          }
          break;
        case 1:  // mouth open
          if (v.part == PartLabel::down_lip) dy = -1.0;
          if (v.part == PartLabel::up_lip) dy = 0.35;
          break;
        case 2:  // brow raise
          if (v.part == PartLabel::left_eyebrow ||
              v.part == PartLabel::right_eyebrow) {
            dy = 1.0;
          }
          break;
        case 3:  // smile: widen lips, raise corners
          if (v.part == PartLabel::up_lip || v.part == PartLabel::down_lip) {
            dx = 0.8 * u;
            dy = 0.3 * u * u;
          }
          break;
        case 4:  // frown: brows dip and slide inward
          if (v.part == PartLabel::left_eyebrow ||
              v.part == PartLabel::right_eyebrow) {
            dy = -0.6 * (1.0 - u * u);
            dx = -0.3 * u;
          }
          break;
        case 5:  // jaw drop
          if (v.part == PartLabel::skin) dy = -1.0;
          if (v.part == PartLabel::down_lip) dy = -0.45;
          break;
        default: {  // extra columns: localized wave on a cycling part
          int slot = j % 8;
          if (part_code(v.part) - 1 == slot) {
            dx = 0.6 * std::sin(1.3 * u + phase);
            dy = 0.6 * std::cos(1.1 * w_loc + phase);
          }
          break;
        }
      }
      model.expression_basis(3 * i, j) = dx;
      model.expression_basis(3 * i + 1, j) = dy;
    }
    normalize_column(model.expression_basis, j, model.mean_shape,
                     1.3 * (j + 1));
  }

  model.validate();

  // Ground truth sized so a short first-order fit from zero can reach it.
  ToyModel out;
  out.model = std::move(model);
  out.ground_truth = ShapeParams::zero(out.model);
  for (int j = 0; j < k_id; ++j) {
    out.ground_truth.id[j] = uniform(rng, -0.05, 0.05);
  }
  for (int j = 0; j < k_exp; ++j) {
    out.ground_truth.exp[j] = uniform(rng, -0.05, 0.05);
  }
  for (int a = 0; a < 3; ++a) {
    out.ground_truth.angles[a] = uniform(rng, -0.04, 0.04);
  }
  out.ground_truth.translation[0] = uniform(rng, -0.05, 0.05);
  out.ground_truth.translation[1] = uniform(rng, -0.05, 0.05);
  out.ground_truth.translation[2] = 0.0;
  return out;
}

}  // namespace partfit
