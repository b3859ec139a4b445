#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "cufsr/train.hpp"

namespace cufsr {

namespace {

using Rgb = std::array<double, 3>;

Rgb random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

struct Shape2d {
    int kind;  // 0 disk, 1 rectangle, 2 triangle, 3 ring
    double cx, cy, r, angle, aspect;
    Rgb color;
    double alpha;
};

bool inside(const Shape2d& s, double x, double y) {
    const double dx = x - s.cx, dy = y - s.cy;
    const double c = std::cos(s.angle), sn = std::sin(s.angle);
    const double u = c * dx + sn * dy, v = -sn * dx + c * dy;
    switch (s.kind) {
    case 0:
        return u * u + (v * s.aspect) * (v * s.aspect) <= s.r * s.r;
    case 1:
        return std::abs(u) <= s.r && std::abs(v) <= s.r * s.aspect;
    case 2: {
        // equilateral triangle of circumradius r
        const double h = s.r * 0.5;
        if (v < -h) return false;
        return std::abs(u) * std::sqrt(3.0) <= (s.r - v);
    }
    default: {
        const double d = std::sqrt(u * u + v * v);
        return d <= s.r && d >= s.r * 0.6;
    }
    }
}

} // namespace

Image synthetic_texture(std::int64_t size, Rng& rng) {
    constexpr int kSuper = 4;
    const double n = static_cast<double>(size);

    const Rgb c0 = random_color(rng), c1 = random_color(rng);
    const double grad_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);

    struct Grating {
        double fx, fy, phase, alpha;
        bool square;
        Rgb color;
    };
    std::vector<Grating> gratings;
    const int n_grat = static_cast<int>(rng.uniform_int(1, 2));
    for (int g = 0; g < n_grat; ++g) {
        const double period = rng.uniform(3.0, 12.0);
        const double a = rng.uniform(0.0, std::numbers::pi);
        gratings.push_back({std::cos(a) / period, std::sin(a) / period, rng.uniform(0.0, 1.0), rng.uniform(0.3, 0.7),
                            rng.uniform() < 0.5, random_color(rng)});
    }

    std::vector<Shape2d> shapes;
    const int n_shapes = static_cast<int>(rng.uniform_int(4, 9));
    for (int k = 0; k < n_shapes; ++k) {
        shapes.push_back({static_cast<int>(rng.uniform_int(0, 3)), rng.uniform(0.0, n), rng.uniform(0.0, n),
                          rng.uniform(n * 0.05, n * 0.25), rng.uniform(0.0, std::numbers::pi), rng.uniform(0.5, 1.5),
                          random_color(rng), rng.uniform(0.6, 1.0)});
    }

    Image img(Shape{size, size, 3});
    const double inv = 1.0 / (kSuper * kSuper);
    for (std::int64_t y = 0; y < size; ++y) {
        for (std::int64_t x = 0; x < size; ++x) {
            Rgb acc{0, 0, 0};
            for (int sy = 0; sy < kSuper; ++sy) {
                for (int sx = 0; sx < kSuper; ++sx) {
                    const double px = x + (sx + 0.5) / kSuper, py = y + (sy + 0.5) / kSuper;
                    const double t = 0.5 + 0.5 * ((px / n - 0.5) * std::cos(grad_angle) + (py / n - 0.5) * std::sin(grad_angle));
                    Rgb col;
                    for (int c = 0; c < 3; ++c) col[c] = c0[c] * (1 - t) + c1[c] * t;
                    for (const auto& g : gratings) {
                        const double ph = 2.0 * std::numbers::pi * (g.fx * px + g.fy * py + g.phase);
                        double w = 0.5 + 0.5 * std::sin(ph);
                        if (g.square) w = w > 0.5 ? 1.0 : 0.0;
                        w *= g.alpha;
                        for (int c = 0; c < 3; ++c) col[c] = col[c] * (1 - w) + g.color[c] * w;
                    }
                    for (const auto& s : shapes) {
                        if (!inside(s, px, py)) continue;
                        for (int c = 0; c < 3; ++c) col[c] = col[c] * (1 - s.alpha) + s.color[c] * s.alpha;
                    }
                    for (int c = 0; c < 3; ++c) acc[c] += col[c];
                }
            }
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(std::clamp(acc[c] * inv, 0.0, 1.0));
        }
    }
    return img;
}

Dataset synthetic_dataset(std::size_t count, std::int64_t size, std::uint64_t seed) {
    Dataset d;
    const Rng master(seed);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = master.fork(i);
        d.names.push_back("synth_" + std::to_string(i) + ".png");
        d.images.push_back(synthetic_texture(size, rng));
    }
    return d;
}

} // namespace cufsr
