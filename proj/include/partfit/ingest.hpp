#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "partfit/geometry.hpp"
#include "partfit/image_io.hpp"
#include "partfit/parts.hpp"

namespace partfit {

// Binary occupancy mask for a single part.
struct PartMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, values 0/1

  static PartMask zeros(int width, int height);

  bool at(int x, int y) const { return bits[y * width + x] != 0; }
  void set(int x, int y, bool v) {
    bits[y * width + x] = v ? 1 : 0;
  }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  long count() const;
};

// The per-part target point sets C_p for one image. Every part key is
// always present; invisible parts hold empty sets.
struct PartPointSets {
  int width = 0;
  int height = 0;
  std::map<PartLabel, PointSet2D> sets;

  static PartPointSets empty(int width, int height);

  const PointSet2D& at(PartLabel p) const { return sets.at(p); }
  PointSet2D& at(PartLabel p) { return sets.at(p); }
};

struct Landmark {
  int vertex_index = 0;
  double x = 0.0;
  double y = 0.0;
};

struct LandmarkSet {
  std::vector<Landmark> landmarks;

  std::size_t size() const { return landmarks.size(); }
  bool empty() const { return landmarks.empty(); }
};

// Label-map manifest: image dimensions plus an optional remapping from
// file pixel values to part codes ("codes=10:1,20:2").
struct Manifest {
  int width = 0;
  int height = 0;
  std::map<int, int> code_remap;
};

Manifest parse_manifest(std::istream& in);
Manifest load_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& m);

// Splits a label image into per-part point sets. Pixel values must be 0
// (background) or a part code 1..8, after the optional manifest remapping;
// anything else is a FormatError, as is a dimension mismatch.
PartPointSets split_label_image(const GrayImage& img, const Manifest& m);
PartPointSets load_label_map(const std::string& path, const Manifest& m);

// One point per set pixel, row-major scan order, (x, y) = (column, row).
PointSet2D mask_to_points(const PartMask& mask, PartLabel label);

// Exact inverse of mask_to_points for integer in-bounds points: sets the
// pixel at (round(x), round(y)) for every point, ignoring out-of-bounds
// points. No splatting or closing (see rasterize_points for that).
PartMask points_to_mask(const PointSet2D& set, int height, int width);

// Removes connected components smaller than min_area. Connectivity must be
// 4 or 8 (default 8).
PartMask filter_isolated_regions(const PartMask& mask, int min_area,
                                 int connectivity = 8);

// If either eyebrow set is non-empty, removes every skin point strictly
// above (smaller y than) the minimum eyebrow y. Other parts untouched.
PartPointSets exclude_forehead(PartPointSets sets);

LandmarkSet parse_landmarks(std::istream& in);
LandmarkSet load_landmarks(const std::string& path);
void write_landmarks(const std::string& path, const LandmarkSet& lms);

struct IngestConfig {
  int min_area = 16;      // isolated-region threshold, pixels
  int connectivity = 8;   // 4 or 8
  bool forehead_cut = true;
};

// Full target-ingest pipeline: load, per-part isolated-region removal,
// forehead exclusion.
PartPointSets load_part_sets(const std::string& label_path,
                             const std::string& manifest_path,
                             const IngestConfig& cfg);
PartPointSets ingest_label_image(const GrayImage& img, const Manifest& m,
                                 const IngestConfig& cfg);

}  // namespace partfit
