#include "partfit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "partfit/errors.hpp"

namespace partfit {

PartMask PartMask::zeros(int width, int height) {
  PartMask m;
  m.width = width;
  m.height = height;
  m.bits.assign(static_cast<std::size_t>(width) * height, 0);
  return m;
}

long PartMask::count() const {
  long c = 0;
  for (std::uint8_t b : bits) c += b != 0;
  return c;
}

PartPointSets PartPointSets::empty(int width, int height) {
  PartPointSets out;
  out.width = width;
  out.height = height;
  for (PartLabel p : kAllParts) {
    PointSet2D s;
    s.label = p;
    out.sets.emplace(p, std::move(s));
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw FormatError("");
    return v;
  } catch (...) {
    throw FormatError(std::string("malformed integer for ") + what + ": '" +
                      tok + "'");
  }
}

}  // namespace

Manifest parse_manifest(std::istream& in) {
  Manifest m;
  bool saw_width = false, saw_height = false;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("manifest: expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "width") {
      m.width = parse_int(value, "width");
      saw_width = true;
    } else if (key == "height") {
      m.height = parse_int(value, "height");
      saw_height = true;
    } else if (key == "codes") {
      std::stringstream ss(value);
      std::string pair;
      while (std::getline(ss, pair, ',')) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) {
          throw FormatError("manifest: codes entries are 'file_value:part_code'");
        }
        const int src = parse_int(trim(pair.substr(0, colon)), "codes key");
        const int dst = parse_int(trim(pair.substr(colon + 1)), "codes value");
        if (dst < 0 || dst > 8) {
          throw FormatError("manifest: remapped part code out of 0..8");
        }
        m.code_remap[src] = dst;
      }
    } else {
      throw FormatError("manifest: unknown key '" + key + "'");
    }
  }
  if (!saw_width || !saw_height) {
    throw FormatError("manifest: width and height are required");
  }
  if (m.width <= 0 || m.height <= 0) {
    throw FormatError("manifest: dimensions must be positive");
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_manifest(in);
}

void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "width = " << m.width << "\n";
  out << "height = " << m.height << "\n";
  if (!m.code_remap.empty()) {
    out << "codes = ";
    bool first = true;
    for (const auto& [src, dst] : m.code_remap) {
      if (!first) out << ",";
      out << src << ":" << dst;
      first = false;
    }
    out << "\n";
  }
}

PartPointSets split_label_image(const GrayImage& img, const Manifest& m) {
  if (img.width != m.width || img.height != m.height) {
    throw FormatError("label map dimensions disagree with manifest");
  }
  PartPointSets out = PartPointSets::empty(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      int code = img.at(x, y);
      if (!m.code_remap.empty()) {
        const auto it = m.code_remap.find(code);
        if (it != m.code_remap.end()) {
          code = it->second;
        } else if (code != kBackgroundCode) {
          throw FormatError("label map: unmapped pixel value " +
                            std::to_string(code));
        }
      }
      if (code == kBackgroundCode) continue;
      const auto part = part_from_code(code);
      if (!part) {
        throw FormatError("label map: unknown part code " +
                          std::to_string(code));
      }
      out.at(*part).points.emplace_back(static_cast<double>(x),
                                        static_cast<double>(y));
    }
  }
  return out;
}

PartPointSets load_label_map(const std::string& path, const Manifest& m) {
  return split_label_image(read_gray_image(path), m);
}

PointSet2D mask_to_points(const PartMask& mask, PartLabel label) {
  PointSet2D out;
  out.label = label;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) {
        out.points.emplace_back(static_cast<double>(x), static_cast<double>(y));
      }
    }
  }
  return out;
}

PartMask points_to_mask(const PointSet2D& set, int height, int width) {
  PartMask m = PartMask::zeros(width, height);
  for (const Point2& p : set.points) {
    const int x = static_cast<int>(std::lround(p.x()));
    const int y = static_cast<int>(std::lround(p.y()));
    if (m.in_bounds(x, y)) m.set(x, y, true);
  }
  return m;
}

PartMask filter_isolated_regions(const PartMask& mask, int min_area,
                                 int connectivity) {
  if (min_area < 1) {
    throw InvalidArgumentError("filter_isolated_regions: min_area >= 1");
  }
  if (connectivity != 4 && connectivity != 8) {
    throw InvalidArgumentError("filter_isolated_regions: connectivity is 4 or 8");
  }
  static constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int neighbor_count = connectivity;

  PartMask out = PartMask::zeros(mask.width, mask.height);
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<int> stack, component;

  for (int y0 = 0; y0 < mask.height; ++y0) {
    for (int x0 = 0; x0 < mask.width; ++x0) {
      const int start = y0 * mask.width + x0;
      if (!mask.bits[start] || seen[start]) continue;
      component.clear();
      stack.assign(1, start);
      seen[start] = 1;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        component.push_back(cur);
        const int cx = cur % mask.width;
        const int cy = cur / mask.width;
        for (int k = 0; k < neighbor_count; ++k) {
          const int nx = cx + dx8[k];
          const int ny = cy + dy8[k];
          if (!mask.in_bounds(nx, ny)) continue;
          const int ni = ny * mask.width + nx;
          if (mask.bits[ni] && !seen[ni]) {
            seen[ni] = 1;
            stack.push_back(ni);
          }
        }
      }
      if (static_cast<int>(component.size()) >= min_area) {
        for (int i : component) out.bits[i] = 1;
      }
    }
  }
  return out;
}

PartPointSets exclude_forehead(PartPointSets sets) {
  double cut = std::numeric_limits<double>::infinity();
  for (PartLabel brow : {PartLabel::left_eyebrow, PartLabel::right_eyebrow}) {
    for (const Point2& p : sets.at(brow).points) cut = std::min(cut, p.y());
  }
  if (!std::isfinite(cut)) return sets;  // both eyebrow sets empty: no-op

  auto& skin = sets.at(PartLabel::skin).points;
  skin.erase(std::remove_if(skin.begin(), skin.end(),
                            [cut](const Point2& p) { return p.y() < cut; }),
             skin.end());
  return sets;
}

LandmarkSet parse_landmarks(std::istream& in) {
  LandmarkSet out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    Landmark lm;
    std::string extra;
    if (!(ss >> lm.vertex_index >> lm.x >> lm.y) || (ss >> extra)) {
      throw FormatError("landmarks: malformed line " + std::to_string(line_no) +
                        ": '" + line + "'");
    }
    if (lm.vertex_index < 0) {
      throw FormatError("landmarks: negative vertex index on line " +
                        std::to_string(line_no));
    }
    out.landmarks.push_back(lm);
  }
  return out;
}

LandmarkSet load_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_landmarks(in);
}

void write_landmarks(const std::string& path, const LandmarkSet& lms) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "# vertex_index x y\n";
  for (const Landmark& lm : lms.landmarks) {
    out << lm.vertex_index << " " << lm.x << " " << lm.y << "\n";
  }
}

PartPointSets ingest_label_image(const GrayImage& img, const Manifest& m,
                                 const IngestConfig& cfg) {
  PartPointSets raw = split_label_image(img, m);
  PartPointSets cleaned = PartPointSets::empty(raw.width, raw.height);
  for (PartLabel p : kAllParts) {
    const PartMask mask =
        filter_isolated_regions(points_to_mask(raw.at(p), raw.height, raw.width),
                                cfg.min_area, cfg.connectivity);
    cleaned.at(p) = mask_to_points(mask, p);
  }
  if (cfg.forehead_cut) cleaned = exclude_forehead(std::move(cleaned));
  return cleaned;
}

PartPointSets load_part_sets(const std::string& label_path,
                             const std::string& manifest_path,
                             const IngestConfig& cfg) {
  const Manifest m = load_manifest(manifest_path);
  return ingest_label_image(read_gray_image(label_path), m, cfg);
}

}  // namespace partfit
