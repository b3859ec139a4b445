#include "cufsr/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cufsr/grid.hpp"

namespace cufsr {

Image load_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
        throw ImageIoError("cannot read PNG " + path.string() + ": " + img.message);
    }
    if (img.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&img);
        throw ImageIoError("unsupported bit depth (16-bit) in " + path.string());
    }
    img.format = PNG_FORMAT_RGBA;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        throw ImageIoError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    const std::int64_t H = img.height, W = img.width;
    Image out(Shape{H, W, 3});
    for (std::int64_t p = 0; p < H * W; ++p)
        for (int c = 0; c < 3; ++c) out[p * 3 + c] = static_cast<float>(buf[p * 4 + c]) / 255.0f;
    return out;
}

void save_png(const Image& image, const std::filesystem::path& path) {
    if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("save_png: expected [H,W,3], got " + shape_str(image.shape()));
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.dim(1));
    img.height = static_cast<png_uint_32>(image.dim(0));
    img.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buf(static_cast<std::size_t>(image.numel()));
    for (std::int64_t i = 0; i < image.numel(); ++i) {
        const double v = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
        buf[i] = static_cast<png_byte>(std::lround(v * 255.0));
    }
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
        throw ImageIoError("cannot write PNG " + path.string() + ": " + img.message);
    }
}

Tensor<float> rgb_to_y(const Image& image) {
    if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("rgb_to_y: expected [H,W,3]");
    const auto H = image.dim(0), W = image.dim(1);
    Tensor<float> y(Shape{H, W, 1});
    for (std::int64_t p = 0; p < H * W; ++p) {
        const double r = image[p * 3], g = image[p * 3 + 1], b = image[p * 3 + 2];
        y[p] = static_cast<float>((65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0);
    }
    return y;
}

double cubic_kernel(double x) {
    constexpr double a = -0.5;
    const double ax = std::abs(x);
    if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
    if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
    return 0.0;
}

namespace {

struct AxisWeights {
    std::vector<std::int64_t> first;   // first tap per output index
    std::vector<std::vector<double>> w;  // normalized tap weights
};

AxisWeights axis_weights(std::int64_t n_in, std::int64_t n_out, double scale, bool antialias) {
    AxisWeights aw;
    aw.first.resize(static_cast<std::size_t>(n_out));
    aw.w.resize(static_cast<std::size_t>(n_out));
    const double stretch = (antialias && scale < 1.0) ? scale : 1.0;
    const double support = 2.0 / stretch;
    for (std::int64_t o = 0; o < n_out; ++o) {
        const double center = (static_cast<double>(o) + 0.5) / scale - 0.5;
        const auto lo = static_cast<std::int64_t>(std::floor(center - support)) + 1;
        const auto hi = static_cast<std::int64_t>(std::ceil(center + support)) - 1;
        std::vector<double> w;
        double total = 0.0;
        for (std::int64_t i = lo; i <= hi; ++i) {
            const double v = cubic_kernel((static_cast<double>(i) - center) * stretch);
            w.push_back(v);
            total += v;
        }
        for (auto& v : w) v /= total;
        aw.first[o] = lo;
        aw.w[o] = std::move(w);
    }
    (void)n_in;
    return aw;
}

} // namespace

Tensor<float> bicubic_resize(const Tensor<float>& image, double s_h, double s_w, bool antialias) {
    if (image.rank() != 3) throw ShapeError("bicubic_resize: expected [H,W,C]");
    if (!(s_h > 0.0) || !(s_w > 0.0)) throw std::invalid_argument("bicubic_resize: scales must be positive");
    const auto H = image.dim(0), W = image.dim(1), C = image.dim(2);
    const auto Ho = scaled_extent(H, s_h), Wo = scaled_extent(W, s_w);
    if (Ho < 1 || Wo < 1) throw std::invalid_argument("bicubic_resize: output size < 1");
    const auto rows = axis_weights(H, Ho, s_h, antialias);
    const auto cols = axis_weights(W, Wo, s_w, antialias);
    auto clamp_idx = [](std::int64_t i, std::int64_t n) { return std::clamp<std::int64_t>(i, 0, n - 1); };

    // columns first: [H, Wo, C]
    std::vector<double> tmp(static_cast<std::size_t>(H * Wo * C), 0.0);
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < Wo; ++x) {
            double* dst = &tmp[(y * Wo + x) * C];
            const auto& w = cols.w[x];
            for (std::size_t k = 0; k < w.size(); ++k) {
                const auto sx = clamp_idx(cols.first[x] + static_cast<std::int64_t>(k), W);
                for (std::int64_t c = 0; c < C; ++c) dst[c] += w[k] * image.at(y, sx, c);
            }
        }
    Tensor<float> out(Shape{Ho, Wo, C});
    for (std::int64_t y = 0; y < Ho; ++y) {
        const auto& w = rows.w[y];
        for (std::int64_t x = 0; x < Wo; ++x)
            for (std::int64_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < w.size(); ++k) {
                    const auto sy = clamp_idx(rows.first[y] + static_cast<std::int64_t>(k), H);
                    acc += w[k] * tmp[(sy * Wo + x) * C + c];
                }
                out.at(y, x, c) = static_cast<float>(acc);
            }
    }
    return out;
}

double psnr(const Tensor<float>& a, const Tensor<float>& b, int border) {
    if (a.shape() != b.shape()) throw ShapeError("psnr: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    if (a.rank() != 3) throw ShapeError("psnr: expected [H,W,C]");
    const auto H = a.dim(0), W = a.dim(1), C = a.dim(2);
    if (border < 0 || 2 * border >= H || 2 * border >= W) throw std::invalid_argument("psnr: border too large");
    double se = 0.0;
    std::int64_t n = 0;
    for (std::int64_t y = border; y < H - border; ++y)
        for (std::int64_t x = border; x < W - border; ++x)
            for (std::int64_t c = 0; c < C; ++c) {
                const double d = static_cast<double>(a.at(y, x, c)) - static_cast<double>(b.at(y, x, c));
                se += d * d;
                ++n;
            }
    const double mse = se / static_cast<double>(n);
    if (mse == 0.0) return kPsnrInfinity;
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

Tensor<float> mirror_x(const Tensor<float>& in) {
    const auto H = in.dim(0), W = in.dim(1), C = in.dim(2);
    Tensor<float> out(in.shape());
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
            for (std::int64_t c = 0; c < C; ++c) out.at(y, W - 1 - x, c) = in.at(y, x, c);
    return out;
}

// counter-clockwise quarter turn: [H,W,C] -> [W,H,C]
Tensor<float> rotate_ccw(const Tensor<float>& in) {
    const auto H = in.dim(0), W = in.dim(1), C = in.dim(2);
    Tensor<float> out(Shape{W, H, C});
    for (std::int64_t y = 0; y < W; ++y)
        for (std::int64_t x = 0; x < H; ++x)
            for (std::int64_t c = 0; c < C; ++c) out.at(y, x, c) = in.at(x, W - 1 - y, c);
    return out;
}

void check_dihedral(const Tensor<float>& image, int t) {
    if (t < 0 || t > 7) throw std::invalid_argument("dihedral index must be in 0..7");
    if (image.rank() != 3) throw ShapeError("dihedral: expected [H,W,C]");
}

} // namespace

Tensor<float> apply_dihedral(const Tensor<float>& image, int t) {
    check_dihedral(image, t);
    Tensor<float> out = t >= 4 ? mirror_x(image) : image;
    for (int r = 0; r < t % 4; ++r) out = rotate_ccw(out);
    return out;
}

Tensor<float> invert_dihedral(const Tensor<float>& image, int t) {
    check_dihedral(image, t);
    Tensor<float> out = image;
    for (int r = 0; r < (4 - t % 4) % 4; ++r) out = rotate_ccw(out);
    return t >= 4 ? mirror_x(out) : out;
}

Tensor<float> crop(const Tensor<float>& image, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w) {
    if (image.rank() != 3) throw ShapeError("crop: expected [H,W,C]");
    const auto C = image.dim(2);
    if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > image.dim(0) || x0 + w > image.dim(1)) {
        throw std::out_of_range("crop window outside image " + shape_str(image.shape()));
    }
    Tensor<float> out(Shape{h, w, C});
    for (std::int64_t y = 0; y < h; ++y) {
        const float* src = &image.at(y0 + y, x0, 0);
        std::copy(src, src + w * C, &out.at(y, 0, 0));
    }
    return out;
}

std::int64_t first_target_of(std::int64_t source, double s) {
    auto t = static_cast<std::int64_t>(std::ceil(static_cast<double>(source) * s));
    t = std::max<std::int64_t>(t, 0);
    while (t > 0 && subpixel_coord(t - 1, s).source >= source) --t;
    while (subpixel_coord(t, s).source < source) ++t;
    return t;
}

CropPair random_crop_pair(const Image& hr, const Image& lr_full, double s, std::int64_t crop_size, Rng& rng) {
    if (crop_size < 1) throw std::invalid_argument("random_crop_pair: crop must be >= 1");
    if (!(s >= 1.0)) throw std::invalid_argument("random_crop_pair: scale must be >= 1");
    const auto Hl = lr_full.dim(0), Wl = lr_full.dim(1);
    if (Hl < crop_size || Wl < crop_size) {
        throw std::invalid_argument("random_crop_pair: image " + shape_str(hr.shape()) + " too small for a " +
                                    std::to_string(crop_size) + "px LR crop at scale " + std::to_string(s));
    }
    CropPair pair;
    pair.scale = s;
    pair.lr_y = rng.uniform_int(0, Hl - crop_size);
    pair.lr_x = rng.uniform_int(0, Wl - crop_size);

    auto place = [&](std::int64_t lr0, std::int64_t hr_extent, std::int64_t& hr0, std::int64_t& offset) {
        const auto lo = first_target_of(lr0, s);
        const auto hi = std::min(first_target_of(lr0 + crop_size, s), hr_extent);
        if (hi - lo < crop_size) throw std::invalid_argument("random_crop_pair: HR region smaller than crop");
        offset = rng.uniform_int(0, hi - lo - crop_size);
        hr0 = lo + offset;
    };
    place(pair.lr_y, hr.dim(0), pair.hr_y, pair.offset_y);
    place(pair.lr_x, hr.dim(1), pair.hr_x, pair.offset_x);
    pair.lr = crop(lr_full, pair.lr_y, pair.lr_x, crop_size, crop_size);
    pair.hr = crop(hr, pair.hr_y, pair.hr_x, crop_size, crop_size);
    return pair;
}

CropPair random_crop_pair(const Image& hr, double s, std::int64_t crop_size, Rng& rng) {
    if (!(s >= 1.0)) throw std::invalid_argument("random_crop_pair: scale must be >= 1");
    if (scaled_extent(hr.dim(0), 1.0 / s) < crop_size || scaled_extent(hr.dim(1), 1.0 / s) < crop_size) {
        throw std::invalid_argument("random_crop_pair: image " + shape_str(hr.shape()) + " too small for a " +
                                    std::to_string(crop_size) + "px LR crop at scale " + std::to_string(s));
    }
    return random_crop_pair(hr, bicubic_resize(hr, 1.0 / s, 1.0 / s), s, crop_size, rng);
}

} // namespace cufsr
