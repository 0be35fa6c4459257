#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "partfit/shape_model.hpp"

namespace partfit {

// Text model container (format documented in the README):
//   partfit-model 1
//   <n> <k_id> <k_exp>
//   mean:            followed by n lines of "x y z"
//   identity:        followed by k_id lines of 3n values (one basis column)
//   expression:      followed by k_exp lines of 3n values
//   part <name>: idx idx ...     (one line per part, all eight, maybe empty)
//   landmarks: idx idx ...
void write_model(const std::filesystem::path& path,
                 const BlendshapeModel& model);
BlendshapeModel read_model(const std::filesystem::path& path);

// Annotation export: one line per part, "part_code: idx idx ...".
void write_annotation(const std::filesystem::path& path,
                      const std::map<PartLabel, std::vector<int>>& annotation);
std::map<PartLabel, std::vector<int>> read_annotation(
    const std::filesystem::path& path);

// Parameter vectors as JSON {"id": [...], "exp": [...], "angles": [...],
// "translation": [...]}.
void write_params(const std::filesystem::path& path, const ShapeParams& p);
ShapeParams read_params(const std::filesystem::path& path);

}  // namespace partfit
