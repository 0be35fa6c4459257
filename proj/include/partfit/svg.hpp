#pragma once

#include <map>
#include <string>
#include <vector>

#include "partfit/ingest.hpp"
#include "partfit/parts.hpp"

namespace partfit {

struct CurveSeries {
  std::string label;
  std::vector<double> values;  // one sample per iteration
};

// Line chart of loss trajectories: linear axes, automatic y range, one
// polyline per series with a fixed palette and a text legend. Deterministic
// output for identical input.
std::string svg_loss_curves(const std::vector<CurveSeries>& series,
                            const std::string& title);

// Target masks as translucent pixel rectangles with the predicted part
// points drawn on top, `cell` screen pixels per image pixel.
std::string svg_fit_overlay(const std::map<PartLabel, PartMask>& target_masks,
                            const std::map<PartLabel, PointSet2D>& predicted,
                            int width, int height, int cell = 4);

// Stable per-part hex color, also used for curve palettes.
const char* part_color(PartLabel p);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace partfit
