#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace partfit {

// The eight semantic face parts. Integer values are the stable label-map
// codes used by every file format; 0 is reserved for background.
enum class PartLabel : int {
  left_eye = 1,
  right_eye = 2,
  left_eyebrow = 3,
  right_eyebrow = 4,
  up_lip = 5,
  down_lip = 6,
  nose = 7,
  skin = 8,
};

inline constexpr int kBackgroundCode = 0;

inline constexpr std::array<PartLabel, 8> kAllParts = {
    PartLabel::left_eye,     PartLabel::right_eye, PartLabel::left_eyebrow,
    PartLabel::right_eyebrow, PartLabel::up_lip,   PartLabel::down_lip,
    PartLabel::nose,         PartLabel::skin,
};

constexpr int part_code(PartLabel p) { return static_cast<int>(p); }

std::string_view part_name(PartLabel p);

// Returns nullopt for codes outside 1..8 (0 is background, not a part).
std::optional<PartLabel> part_from_code(int code);

std::optional<PartLabel> part_from_name(std::string_view name);

}  // namespace partfit
