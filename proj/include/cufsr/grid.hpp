#pragma once

#include <cstdint>

namespace cufsr {

/// Location of an integer target-grid index relative to the source grid at
/// scale s: source = floor(t / s), delta = mod(t, s) / s in [0, 1).
struct SubpixelCoord {
    std::int64_t source;
    double delta;
};

SubpixelCoord subpixel_coord(std::int64_t target, double s);

/// floor(s * n), tolerant of representation error in s (2.2 * 10 -> 22).
std::int64_t scaled_extent(std::int64_t n, double s);

} // namespace cufsr
