#include "partfit/parts.hpp"

namespace partfit {

std::string_view part_name(PartLabel p) {
  switch (p) {
    case PartLabel::left_eye: return "left_eye";
    case PartLabel::right_eye: return "right_eye";
    case PartLabel::left_eyebrow: return "left_eyebrow";
    case PartLabel::right_eyebrow: return "right_eyebrow";
    case PartLabel::up_lip: return "up_lip";
    case PartLabel::down_lip: return "down_lip";
    case PartLabel::nose: return "nose";
    case PartLabel::skin: return "skin";
  }
  return "unknown";
}

std::optional<PartLabel> part_from_code(int code) {
  if (code < 1 || code > 8) return std::nullopt;
  return static_cast<PartLabel>(code);
}

std::optional<PartLabel> part_from_name(std::string_view name) {
  for (PartLabel p : kAllParts) {
    if (part_name(p) == name) return p;
  }
  return std::nullopt;
}

}  // namespace partfit
