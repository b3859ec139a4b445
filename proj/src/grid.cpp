#include "cufsr/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace cufsr {

SubpixelCoord subpixel_coord(std::int64_t target, double s) {
    if (!(s > 0.0)) throw std::invalid_argument("scale must be positive");
    if (target < 0) throw std::invalid_argument("target index must be non-negative");
    const double t = static_cast<double>(target);
    // fmod is exact, so integer scales give delta = i / s bit-for-bit.
    const double r = std::fmod(t, s);
    const auto source = static_cast<std::int64_t>(std::llround((t - r) / s));
    double delta = r / s;
    if (delta >= 1.0) delta = std::nextafter(1.0, 0.0);
    return {source, delta};
}

std::int64_t scaled_extent(std::int64_t n, double s) {
    return static_cast<std::int64_t>(std::floor(static_cast<double>(n) * s + 1e-9));
}

} // namespace cufsr
