#include <doctest.h>

#include <fstream>
#include <queue>
#include <random>
#include <sstream>

#include "partfit/errors.hpp"
#include "partfit/image_io.hpp"
#include "partfit/ingest.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using partfit::GrayImage;
using partfit::Manifest;
using partfit::PartLabel;
using partfit::PartMask;
using partfit::PartPointSets;
using partfit::Point2;
using partfit::PointSet2D;

namespace {

// Reference connected-components labeling by BFS flood fill, used to derive
// expected survivors for filter_isolated_regions.
std::vector<std::vector<int>> oracle_components(const PartMask& m,
                                                int connectivity) {
  std::vector<std::vector<int>> comps;
  std::vector<char> seen(m.bits.size(), 0);
  for (int i = 0; i < static_cast<int>(m.bits.size()); ++i) {
    if (!m.bits[i] || seen[i]) continue;
    std::vector<int> comp;
    std::queue<int> q;
    q.push(i);
    seen[i] = 1;
    while (!q.empty()) {
      const int cur = q.front();
      q.pop();
      comp.push_back(cur);
      const int cx = cur % m.width, cy = cur / m.width;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (connectivity == 4 && dx != 0 && dy != 0) continue;
          const int nx = cx + dx, ny = cy + dy;
          if (nx < 0 || nx >= m.width || ny < 0 || ny >= m.height) continue;
          const int ni = ny * m.width + nx;
          if (m.bits[ni] && !seen[ni]) {
            seen[ni] = 1;
            q.push(ni);
          }
        }
      }
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

GrayImage label_image_4x4_zero() { return GrayImage::zeros(4, 4); }

Manifest manifest_for(int w, int h) {
  Manifest m;
  m.width = w;
  m.height = h;
  return m;
}

}  // namespace

TEST_CASE("label map splitting: spec examples") {
  // all zeros: every part empty
  auto sets = split_label_image(label_image_4x4_zero(), manifest_for(4, 4));
  for (PartLabel p : partfit::kAllParts) CHECK(sets.at(p).empty());

  // code 1 at (x=1, y=0) lands in left_eye
  GrayImage img = GrayImage::zeros(2, 2);
  img.at(1, 0) = 1;
  sets = split_label_image(img, manifest_for(2, 2));
  REQUIRE(sets.at(PartLabel::left_eye).size() == 1);
  CHECK(sets.at(PartLabel::left_eye).points[0] == Point2(1, 0));
  CHECK(sets.at(PartLabel::left_eye).label == PartLabel::left_eye);

  // unknown code 99
  img.at(0, 1) = 99;
  CHECK_THROWS_AS(split_label_image(img, manifest_for(2, 2)),
                  partfit::FormatError);

  // dimension mismatch against manifest
  CHECK_THROWS_AS(split_label_image(label_image_4x4_zero(), manifest_for(4, 5)),
                  partfit::FormatError);
}

TEST_CASE("label map code remapping via manifest") {
  GrayImage img = GrayImage::zeros(2, 1);
  img.at(0, 0) = 10;
  img.at(1, 0) = 20;
  Manifest m = manifest_for(2, 1);
  m.code_remap = {{10, 7}, {20, 0}};
  const auto sets = split_label_image(img, m);
  CHECK(sets.at(PartLabel::nose).size() == 1);
  // 20 remaps to background
  long total = 0;
  for (PartLabel p : partfit::kAllParts) total += sets.at(p).size();
  CHECK(total == 1);

  m.code_remap = {{10, 7}};
  CHECK_THROWS_AS(split_label_image(img, m), partfit::FormatError);  // 20 unmapped
}

TEST_CASE("mask_to_points ordering and inverse") {
  PartMask m = PartMask::zeros(2, 2);
  SUBCASE("empty mask") {
    CHECK(mask_to_points(m, PartLabel::skin).empty());
  }
  SUBCASE("full 2x2 mask, row-major order") {
    for (auto& b : m.bits) b = 1;
    const auto pts = mask_to_points(m, PartLabel::skin);
    REQUIRE(pts.size() == 4);
    CHECK(pts.points[0] == Point2(0, 0));
    CHECK(pts.points[1] == Point2(1, 0));
    CHECK(pts.points[2] == Point2(0, 1));
    CHECK(pts.points[3] == Point2(1, 1));
  }
  SUBCASE("single pixel at row 3 column 7") {
    PartMask big = PartMask::zeros(10, 5);
    big.set(7, 3, true);
    const auto pts = mask_to_points(big, PartLabel::nose);
    REQUIRE(pts.size() == 1);
    CHECK(pts.points[0] == Point2(7, 3));
  }
}

TEST_CASE("points_to_mask / mask_to_points round trip on integer sets") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    PartMask m = PartMask::zeros(17, 13);
    for (int i = 0; i < 30; ++i) {
      m.set(static_cast<int>(rng() % 17), static_cast<int>(rng() % 13), true);
    }
    const auto pts = mask_to_points(m, PartLabel::skin);
    CHECK(pts.size() == static_cast<std::size_t>(m.count()));
    const PartMask back = partfit::points_to_mask(pts, 13, 17);
    CHECK(back.bits == m.bits);
  }
}

TEST_CASE("filter_isolated_regions: spec examples against flood-fill oracle") {
  // one ~100 px blob and one 2 px blob
  PartMask m = PartMask::zeros(32, 32);
  for (int y = 2; y < 12; ++y) {
    for (int x = 2; x < 12; ++x) m.set(x, y, true);
  }
  m.set(25, 25, true);
  m.set(26, 25, true);

  const auto comps = oracle_components(m, 8);
  REQUIRE(comps.size() == 2);

  const PartMask filtered = filter_isolated_regions(m, 5);
  CHECK(filtered.count() == 100);
  CHECK_FALSE(filtered.at(25, 25));
  CHECK(filtered.at(5, 5));

  // single blob >= min_area survives untouched
  PartMask single = PartMask::zeros(8, 8);
  for (int x = 1; x < 6; ++x) single.set(x, 3, true);
  CHECK(filter_isolated_regions(single, 5).bits == single.bits);

  // empty stays empty
  CHECK(filter_isolated_regions(PartMask::zeros(4, 4), 3).count() == 0);
}

TEST_CASE("filter_isolated_regions: connectivity and idempotence") {
  // Two pixels touching only diagonally: one component under 8-connectivity,
  // two under 4-connectivity.
  PartMask m = PartMask::zeros(4, 4);
  m.set(1, 1, true);
  m.set(2, 2, true);
  CHECK(filter_isolated_regions(m, 2, 8).count() == 2);
  CHECK(filter_isolated_regions(m, 2, 4).count() == 0);

  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 10; ++trial) {
    PartMask r = PartMask::zeros(24, 24);
    for (int i = 0; i < 120; ++i) {
      r.set(static_cast<int>(rng() % 24), static_cast<int>(rng() % 24), true);
    }
    const PartMask once = filter_isolated_regions(r, 4);
    const PartMask twice = filter_isolated_regions(once, 4);
    CHECK(once.bits == twice.bits);

    // survivors are exactly the oracle components of size >= min_area
    long expect = 0;
    for (const auto& c : oracle_components(r, 8)) {
      if (static_cast<int>(c.size()) >= 4) expect += c.size();
    }
    CHECK(once.count() == expect);
  }
  CHECK_THROWS_AS(filter_isolated_regions(m, 0), partfit::InvalidArgumentError);
  CHECK_THROWS_AS(filter_isolated_regions(m, 1, 6),
                  partfit::InvalidArgumentError);
}

TEST_CASE("exclude_forehead") {
  PartPointSets sets = PartPointSets::empty(128, 128);
  // eyebrows span y in [40, 50]
  for (int y = 40; y <= 50; ++y) {
    sets.at(PartLabel::left_eyebrow).points.emplace_back(30.0, y);
    sets.at(PartLabel::right_eyebrow).points.emplace_back(90.0, y);
  }
  // skin spans y in [0, 100]
  for (int y = 0; y <= 100; ++y) sets.at(PartLabel::skin).points.emplace_back(60.0, y);
  // a nose point above the cut must survive (only skin is filtered)
  sets.at(PartLabel::nose).points.emplace_back(60.0, 10.0);

  const auto cut = exclude_forehead(sets);
  CHECK(cut.at(PartLabel::skin).size() == 61);  // y in [40, 100]
  for (const auto& p : cut.at(PartLabel::skin).points) CHECK(p.y() >= 40.0);
  CHECK(cut.at(PartLabel::nose).size() == 1);
  CHECK(cut.at(PartLabel::left_eyebrow).size() == 11);

  SUBCASE("no eyebrows: unchanged") {
    PartPointSets bare = PartPointSets::empty(64, 64);
    bare.at(PartLabel::skin).points.emplace_back(5.0, 5.0);
    const auto out = exclude_forehead(bare);
    CHECK(out.at(PartLabel::skin).size() == 1);
  }
  SUBCASE("skin already below: unchanged") {
    PartPointSets below = PartPointSets::empty(64, 64);
    below.at(PartLabel::left_eyebrow).points.emplace_back(10.0, 20.0);
    below.at(PartLabel::skin).points.emplace_back(10.0, 30.0);
    const auto out = exclude_forehead(below);
    CHECK(out.at(PartLabel::skin).size() == 1);
  }
}

TEST_CASE("landmark parsing") {
  std::istringstream good("# comment\n0 12.5 30.0\n\n7 1 2 # trailing\n");
  const auto lms = partfit::parse_landmarks(good);
  REQUIRE(lms.size() == 2);
  CHECK(lms.landmarks[0].vertex_index == 0);
  CHECK(lms.landmarks[0].x == doctest::Approx(12.5));
  CHECK(lms.landmarks[0].y == doctest::Approx(30.0));
  CHECK(lms.landmarks[1].vertex_index == 7);

  std::istringstream empty("");
  CHECK(partfit::parse_landmarks(empty).empty());

  std::istringstream bad("a b c\n");
  CHECK_THROWS_AS(partfit::parse_landmarks(bad), partfit::FormatError);

  std::istringstream negative("-1 0 0\n");
  CHECK_THROWS_AS(partfit::parse_landmarks(negative), partfit::FormatError);

  std::istringstream excess("0 1 2 3\n");
  CHECK_THROWS_AS(partfit::parse_landmarks(excess), partfit::FormatError);
}

TEST_CASE("pgm and png round trips") {
  testsupport::TempDir tmp;
  GrayImage img = GrayImage::zeros(9, 5);
  std::mt19937_64 rng(3);
  for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng() % 9);

  const auto pgm = tmp.file("img.pgm");
  partfit::write_pgm(pgm, img);
  const GrayImage back = partfit::read_gray_image(pgm);
  CHECK(back.width == 9);
  CHECK(back.height == 5);
  CHECK(back.pixels == img.pixels);

  const auto png = tmp.file("img.png");
  partfit::write_png(png, img);
  const GrayImage back_png = partfit::read_gray_image(png);
  CHECK(back_png.pixels == img.pixels);

  CHECK_THROWS_AS(partfit::read_gray_image(tmp.file("missing.pgm")),
                  partfit::IoError);

  std::ofstream junk(tmp.file("junk.bin"), std::ios::binary);
  junk << "XYZW";
  junk.close();
  CHECK_THROWS_AS(partfit::read_gray_image(tmp.file("junk.bin")),
                  partfit::FormatError);
}

TEST_CASE("manifest parsing") {
  std::istringstream good("width = 128\nheight=64\n# note\ncodes = 10:1,11:2\n");
  const Manifest m = partfit::parse_manifest(good);
  CHECK(m.width == 128);
  CHECK(m.height == 64);
  CHECK(m.code_remap.at(10) == 1);
  CHECK(m.code_remap.at(11) == 2);

  std::istringstream missing("width = 4\n");
  CHECK_THROWS_AS(partfit::parse_manifest(missing), partfit::FormatError);
  std::istringstream unknown("width=4\nheight=4\nfps=3\n");
  CHECK_THROWS_AS(partfit::parse_manifest(unknown), partfit::FormatError);
}

TEST_CASE("ingest pipeline: isolated noise removed, forehead cut applied") {
  GrayImage img = GrayImage::zeros(64, 64);
  // skin block y in [10, 40]
  for (int y = 10; y <= 40; ++y) {
    for (int x = 20; x <= 44; ++x) img.at(x, y) = 8;
  }
  // eyebrow rows at y in [20, 22]
  for (int y = 20; y <= 22; ++y) {
    for (int x = 4; x <= 16; ++x) img.at(x, y) = 3;
  }
  // 2-px skin noise far away
  img.at(60, 60) = 8;
  img.at(61, 60) = 8;

  partfit::IngestConfig cfg;
  cfg.min_area = 5;
  const auto sets = partfit::ingest_label_image(img, manifest_for(64, 64), cfg);
  // noise gone, forehead (y < 20) gone
  for (const auto& p : sets.at(PartLabel::skin).points) {
    CHECK(p.y() >= 20.0);
    CHECK(p.x() <= 44.0);
  }
  CHECK(sets.at(PartLabel::skin).size() == 25 * (40 - 20 + 1));
  CHECK(sets.at(PartLabel::left_eyebrow).size() == 13 * 3);
}
