#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "partfit/baselines.hpp"
#include "partfit/errors.hpp"
#include "support/oracles.hpp"

using namespace partfit;

namespace {

PointSet2D make_set(std::initializer_list<std::pair<double, double>> pts) {
  PointSet2D s;
  for (const auto& [x, y] : pts) s.points.emplace_back(x, y);
  return s;
}

// Brute-force oracle: mean over `from` of the squared distance to the
// closest point of `to`, by exhaustive scan.
double directed_oracle(const PointSet2D& from, const PointSet2D& to) {
  double sum = 0.0;
  for (const Point2& p : from.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& t : to.points) best = std::min(best, (p - t).squaredNorm());
    sum += best;
  }
  return sum / static_cast<double>(from.points.size());
}

PointSet2D random_set(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  PointSet2D s;
  for (int i = 0; i < n; ++i) s.points.emplace_back(u(rng), u(rng));
  return s;
}

// Central finite differences of a scalar function of one point set.
template <typename F>
std::vector<Point2> fd_point_gradient(const PointSet2D& base, F loss_of,
                                      double step = 1e-6) {
  std::vector<Point2> g(base.points.size(), Point2::Zero());
  for (std::size_t i = 0; i < base.points.size(); ++i) {
    for (int c = 0; c < 2; ++c) {
      PointSet2D plus = base;
      PointSet2D minus = base;
      plus.points[i][c] += step;
      minus.points[i][c] -= step;
      g[i][c] = (loss_of(plus) - loss_of(minus)) / (2.0 * step);
    }
  }
  return g;
}

void check_grads_close(const std::vector<Point2>& got,
                       const std::vector<Point2>& want, double rel) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    for (int c = 0; c < 2; ++c) {
      const double tol = rel * std::max(1.0, std::abs(want[i][c]));
      CHECK(std::abs(got[i][c] - want[i][c]) <= tol);
    }
  }
}

}  // namespace

TEST_CASE("chamfer distance matches hand-worked and brute-force values") {
  const PointSet2D a = make_set({{0, 0}, {1, 0}, {0, 2}});
  CHECK(chamfer_loss(a, a).loss == 0.0);

  // Single pair at distance 5: both directions contribute 25.
  CHECK(chamfer_loss(make_set({{0, 0}}), make_set({{3, 4}})).loss == 50.0);

  // Asymmetric cardinality: pred->target is 0 (exact hit), target->pred
  // averages {0, 100} over the two target points.
  const PointSet2D pred = make_set({{0, 0}});
  const PointSet2D target = make_set({{0, 0}, {6, 8}});
  CHECK(chamfer_loss(pred, target).loss == 50.0);

  std::mt19937_64 rng(401);
  for (int t = 0; t < 30; ++t) {
    const PointSet2D p = random_set(rng, 2 + t % 7, -4.0, 4.0);
    const PointSet2D q = random_set(rng, 2 + (t * 3) % 9, -4.0, 4.0);
    const double want = directed_oracle(p, q) + directed_oracle(q, p);
    CHECK(chamfer_loss(p, q).loss == doctest::Approx(want).epsilon(1e-12));
    // Value symmetry under argument swap.
    CHECK(chamfer_loss(p, q).loss ==
          doctest::Approx(chamfer_loss(q, p).loss).epsilon(1e-12));
  }
}

TEST_CASE("directed NN loss is one-sided and order-sensitive") {
  const PointSet2D pred = make_set({{0, 0}});
  const PointSet2D target = make_set({{0, 0}, {6, 8}});
  CHECK(nn_loss_directed(pred, target).loss == 0.0);
  CHECK(nn_loss_directed(target, pred).loss == 50.0);
  CHECK(nn_loss_directed(make_set({{0, 0}}), make_set({{3, 4}})).loss == 25.0);

  std::mt19937_64 rng(402);
  for (int t = 0; t < 30; ++t) {
    const PointSet2D p = random_set(rng, 3 + t % 5, -4.0, 4.0);
    const PointSet2D q = random_set(rng, 3 + (t * 5) % 8, -4.0, 4.0);
    CHECK(nn_loss_directed(p, q).loss ==
          doctest::Approx(directed_oracle(p, q)).epsilon(1e-12));
  }
}

TEST_CASE("empty inputs to point-cloud losses are rejected") {
  const PointSet2D some = make_set({{1, 1}});
  const PointSet2D none;
  CHECK_THROWS_AS((void)chamfer_loss(none, some), EmptySetError);
  CHECK_THROWS_AS((void)chamfer_loss(some, none), EmptySetError);
  CHECK_THROWS_AS((void)nn_loss_directed(none, some), EmptySetError);
  CHECK_THROWS_AS((void)nn_loss_directed(some, none), EmptySetError);
}

TEST_CASE("chamfer gradient agrees with finite differences off ties") {
  std::mt19937_64 rng(403);
  int checked = 0;
  while (checked < 25) {
    const PointSet2D p = random_set(rng, 4, -3.0, 3.0);
    const PointSet2D q = random_set(rng, 5, -3.0, 3.0);
    // Skip configurations where a nearest-neighbor assignment is nearly
    // tied; the loss is non-differentiable exactly there.
    bool tied = false;
    for (const Point2& x : p.points) {
      std::vector<double> d;
      for (const Point2& y : q.points) d.push_back((x - y).norm());
      std::sort(d.begin(), d.end());
      if (d[1] - d[0] < 1e-2) tied = true;
    }
    for (const Point2& y : q.points) {
      std::vector<double> d;
      for (const Point2& x : p.points) d.push_back((x - y).norm());
      std::sort(d.begin(), d.end());
      if (d[1] - d[0] < 1e-2) tied = true;
    }
    if (tied) continue;
    ++checked;

    const auto res = chamfer_loss(p, q);
    const auto fd = fd_point_gradient(
        p, [&](const PointSet2D& s) { return chamfer_loss(s, q).loss; });
    check_grads_close(res.gradient, fd, 1e-5);
  }
}

TEST_CASE("directed NN gradients cover both argument sides") {
  std::mt19937_64 rng(404);
  int checked = 0;
  while (checked < 25) {
    const PointSet2D p = random_set(rng, 4, -3.0, 3.0);
    const PointSet2D q = random_set(rng, 4, -3.0, 3.0);
    bool tied = false;
    for (const Point2& x : p.points) {
      std::vector<double> d;
      for (const Point2& y : q.points) d.push_back((x - y).norm());
      std::sort(d.begin(), d.end());
      if (d[1] - d[0] < 1e-2) tied = true;
    }
    if (tied) continue;
    ++checked;

    const auto res = nn_loss_directed(p, q);
    const auto fd_from = fd_point_gradient(
        p, [&](const PointSet2D& s) { return nn_loss_directed(s, q).loss; });
    const auto fd_to = fd_point_gradient(
        q, [&](const PointSet2D& s) { return nn_loss_directed(p, s).loss; });
    check_grads_close(res.grad_from, fd_from, 1e-5);
    check_grads_close(res.grad_to, fd_to, 1e-5);
  }
}

namespace {

// Occupancy-field oracle evaluated densely with no cutoff, straight from
// the definition o(q) = 1 - prod_v (1 - exp(-|q - v|^2 / s^2)).
double soft_iou_oracle(const PointSet2D& pred, const PartMask& mask,
                       double sigma) {
  double inter = 0.0, occ = 0.0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      double vac = 1.0;
      for (const Point2& v : pred.points) {
        const double d2 = (v - Point2(x, y)).squaredNorm();
        vac *= 1.0 - std::min(std::exp(-d2 / (sigma * sigma)), 1.0 - 1e-12);
      }
      const double o = 1.0 - vac;
      occ += o;
      if (mask.at(x, y)) inter += o;
    }
  }
  const double count = static_cast<double>(mask.count());
  if (count == 0.0) return 1.0;
  return 1.0 - inter / (occ + count - inter);
}

PartMask disc_mask(int w, int h, double cx, double cy, double r) {
  PartMask m = PartMask::zeros(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.set(x, y, true);
  return m;
}

}  // namespace

TEST_CASE("soft silhouette loss matches the dense-definition oracle") {
  std::mt19937_64 rng(405);
  for (int t = 0; t < 10; ++t) {
    PointSet2D pred = random_set(rng, 6, 3.0, 12.0);
    const PartMask mask = disc_mask(16, 16, 8.0, 7.0, 4.0);
    const SoftSilhouetteConfig cfg{1.5, 8.0};
    const double got = soft_silhouette_iou_loss(pred, mask, cfg).loss;
    const double want = soft_iou_oracle(pred, mask, cfg.sigma);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("soft silhouette gradient agrees with finite differences") {
  std::mt19937_64 rng(406);
  const PartMask mask = disc_mask(16, 16, 8.0, 8.0, 4.0);
  const SoftSilhouetteConfig cfg{1.5, 8.0};
  for (int t = 0; t < 8; ++t) {
    const PointSet2D pred = random_set(rng, 5, 4.0, 12.0);
    const auto res = soft_silhouette_iou_loss(pred, mask, cfg);
    const auto fd = fd_point_gradient(
        pred,
        [&](const PointSet2D& s) {
          return soft_silhouette_iou_loss(s, mask, cfg).loss;
        },
        1e-5);
    check_grads_close(res.gradient, fd, 1e-5);
  }
}

TEST_CASE("soft silhouette saturates with vanishing gradient far away") {
  // Points displaced ~20 sigma from every mask pixel: the overlap is far
  // below double precision, so the loss pins at 1 and the gradient supplies
  // no pull-back signal.
  const PartMask mask = disc_mask(64, 64, 12.0, 12.0, 5.0);
  PointSet2D pred;
  for (int i = 0; i < 9; ++i) pred.points.emplace_back(50.0 + i % 3, 50.0 + i / 3);
  const auto res = soft_silhouette_iou_loss(pred, mask, SoftSilhouetteConfig{1.5, 8.0});
  CHECK(res.loss == doctest::Approx(1.0).epsilon(1e-9));
  for (const Point2& g : res.gradient) CHECK(g.norm() < 1e-8);

  // Overlapping configuration for contrast: clearly below saturation.
  PointSet2D near;
  for (int i = 0; i < 9; ++i) near.points.emplace_back(10.0 + 2 * (i % 3), 10.0 + 2 * (i / 3));
  CHECK(soft_silhouette_iou_loss(near, mask, SoftSilhouetteConfig{1.5, 8.0}).loss < 0.8);
}

TEST_CASE("soft silhouette edge cases: empty mask, on-pixel point, validation") {
  const PointSet2D pred = make_set({{3.0, 3.0}});
  const auto empty = soft_silhouette_iou_loss(pred, PartMask::zeros(8, 8), {});
  CHECK(empty.loss == 1.0);
  CHECK(empty.gradient[0].norm() == 0.0);

  // Point exactly on a pixel center: the kernel clamp keeps everything finite.
  const PartMask mask = disc_mask(8, 8, 3.0, 3.0, 2.0);
  const auto on_pixel = soft_silhouette_iou_loss(pred, mask, {});
  CHECK(std::isfinite(on_pixel.loss));
  CHECK(on_pixel.gradient[0].allFinite());

  CHECK_THROWS_AS(
      (void)soft_silhouette_iou_loss(PointSet2D{}, mask, {}), EmptySetError);
  CHECK_THROWS_AS((void)soft_silhouette_iou_loss(pred, PartMask{}, {}),
                  InvalidArgumentError);
  CHECK_THROWS_AS(
      (void)soft_silhouette_iou_loss(pred, mask, SoftSilhouetteConfig{0.0, 8.0}),
      InvalidArgumentError);
}

TEST_CASE("soft silhouette loss is deterministic across repeat evaluation") {
  std::mt19937_64 rng(407);
  const PointSet2D pred = random_set(rng, 12, 2.0, 14.0);
  const PartMask mask = disc_mask(16, 16, 8.0, 8.0, 5.0);
  const auto a = soft_silhouette_iou_loss(pred, mask, {});
  const auto b = soft_silhouette_iou_loss(pred, mask, {});
  CHECK(a.loss == b.loss);
  for (std::size_t i = 0; i < a.gradient.size(); ++i) {
    CHECK((a.gradient[i] - b.gradient[i]).norm() == 0.0);
  }
}
