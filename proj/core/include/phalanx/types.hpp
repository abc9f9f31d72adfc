#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace phalanx {

inline constexpr const char* kVersionString = "0.1.0";

// Angles are stored in 256ths of a full turn (1 unit = 360/256 degrees).
inline constexpr int kAngleUnits = 256;

enum class MinutiaType : std::uint8_t {
    other = 0,
    ridge_ending = 1,
    bifurcation = 2,
};

struct Minutia {
    std::uint16_t x = 0;  // 14-bit, must lie inside the image
    std::uint16_t y = 0;
    std::uint8_t angle = 0;  // 0..255
    MinutiaType type = MinutiaType::other;
    std::uint8_t quality = 0;  // 0..100
};

struct TemplateHeader {
    std::uint16_t capture_equipment_id = 0;
    std::uint16_t image_width = 0;   // pixels, nonzero
    std::uint16_t image_height = 0;  // pixels, nonzero
    std::uint16_t resolution_x = 0;  // pixels per cm, nonzero
    std::uint16_t resolution_y = 0;
    std::uint8_t finger_position = 0;   // 0..10 (0 unknown, 1..5 right, 6..10 left)
    std::uint8_t impression_number = 1; // 1..4
};

struct MinutiaTemplate {
    TemplateHeader header;
    std::vector<Minutia> minutiae;  // at most 255 entries
    int nfiq = 3;                   // 1 (best) .. 5 (worst)
};

}  // namespace phalanx
