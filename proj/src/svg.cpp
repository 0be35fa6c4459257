#include "partfit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

constexpr const char* kPalette[] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void append(std::string& out, const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  out += buf;
}

}  // namespace

const char* part_color(PartLabel p) {
  return kPalette[(part_code(p) - 1) % 8];
}

std::string svg_loss_curves(const std::vector<CurveSeries>& series,
                            const std::string& title) {
  constexpr int kW = 720, kH = 440;
  constexpr int kLeft = 70, kRight = 20, kTop = 40, kBottom = 40;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;

  std::size_t max_len = 0;
  double y_max = 0.0;
  for (const CurveSeries& s : series) {
    max_len = std::max(max_len, s.values.size());
    for (double v : s.values) {
      if (std::isfinite(v)) y_max = std::max(y_max, v);
    }
  }
  if (y_max <= 0.0) y_max = 1.0;
  const double x_max = max_len > 1 ? static_cast<double>(max_len - 1) : 1.0;

  const auto px = [&](double it) { return kLeft + plot_w * it / x_max; };
  const auto py = [&](double v) {
    return kTop + plot_h * (1.0 - std::clamp(v / y_max, 0.0, 1.0));
  };

  std::string out;
  append(out,
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
         "viewBox=\"0 0 %d %d\">\n",
         kW, kH, kW, kH);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  append(out,
         "<text x=\"%d\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\""
         ">%s</text>\n",
         kLeft, title.c_str());

  // Axes and y ticks.
  append(out,
         "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
         kLeft, kTop, kLeft, kH - kBottom);
  append(out,
         "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
         kLeft, kH - kBottom, kW - kRight, kH - kBottom);
  for (int t = 0; t <= 4; ++t) {
    const double v = y_max * t / 4.0;
    const double y = py(v);
    append(out,
           "<line x1=\"%d\" y1=\"%s\" x2=\"%d\" y2=\"%s\" stroke=\"#cccccc\"/>\n",
           kLeft, fmt(y).c_str(), kW - kRight, fmt(y).c_str());
    append(out,
           "<text x=\"%d\" y=\"%s\" font-family=\"sans-serif\" font-size=\"11\""
           " text-anchor=\"end\">%s</text>\n",
           kLeft - 6, fmt(y + 4).c_str(), fmt(v).c_str());
  }
  append(out,
         "<text x=\"%s\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\""
         " text-anchor=\"middle\">iteration</text>\n",
         fmt(kLeft + plot_w / 2).c_str(), kH - 10);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::vector<double>& vals = series[s].values;
    if (vals.empty()) continue;
    std::string path;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (!std::isfinite(vals[i])) continue;
      path += path.empty() ? "M" : " L";
      path += fmt(px(static_cast<double>(i)));
      path += ",";
      path += fmt(py(vals[i]));
    }
    append(out,
           "<path d=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\"/>\n",
           path.c_str(), kPalette[s % 8]);
    append(out,
           "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\""
           " fill=\"%s\">%s</text>\n",
           kW - kRight - 170, kTop + 16 * static_cast<int>(s) + 12,
           kPalette[s % 8], series[s].label.c_str());
  }
  out += "</svg>\n";
  return out;
}

std::string svg_fit_overlay(const std::map<PartLabel, PartMask>& target_masks,
                            const std::map<PartLabel, PointSet2D>& predicted,
                            int width, int height, int cell) {
  if (width < 1 || height < 1 || cell < 1) {
    throw InvalidArgumentError("overlay needs positive dimensions");
  }
  std::string out;
  append(out,
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
         "viewBox=\"0 0 %d %d\">\n",
         width * cell, height * cell, width * cell, height * cell);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (const auto& [part, mask] : target_masks) {
    if (mask.width != width || mask.height != height) {
      throw InvalidArgumentError("overlay mask dimensions disagree");
    }
    const char* color = part_color(part);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!mask.at(x, y)) continue;
        append(out,
               "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" "
               "fill=\"%s\" fill-opacity=\"0.35\"/>\n",
               x * cell, y * cell, cell, cell, color);
      }
    }
  }
  for (const auto& [part, set] : predicted) {
    const char* color = part_color(part);
    const double r = cell * 0.35;
    for (const Point2& p : set.points) {
      append(out,
             "<circle cx=\"%s\" cy=\"%s\" r=\"%s\" fill=\"%s\" "
             "stroke=\"black\" stroke-width=\"0.4\"/>\n",
             fmt(p.x() * cell + cell * 0.5).c_str(),
             fmt(p.y() * cell + cell * 0.5).c_str(), fmt(r).c_str(), color);
    }
  }
  out += "</svg>\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
}

}  // namespace partfit
