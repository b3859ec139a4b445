#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>

#include "cufsr/rng.hpp"
#include "cufsr/tensor.hpp"

namespace cufsr {

/// [H,W,3] float tensor, nominally in [0,1].
using Image = Tensor<float>;

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit RGB/RGBA PNG; byte p maps to p/255 and alpha is dropped.
Image load_png(const std::filesystem::path& path);
/// Clamps to [0,1] and writes round(v*255) as 8-bit RGB.
void save_png(const Image& image, const std::filesystem::path& path);

/// BT.601 studio-swing luma: (65.481 R + 128.553 G + 24.966 B + 16) / 255.
Tensor<float> rgb_to_y(const Image& image);

/// Separable cubic resampling (a = -0.5), edge-clamped, to
/// floor(s_h*H) x floor(s_w*W). Output pixel o samples input coordinate
/// (o + 0.5)/s - 0.5. When downscaling with antialias on, the kernel is
/// stretched by 1/s. Works for any channel count.
Tensor<float> bicubic_resize(const Tensor<float>& image, double s_h, double s_w, bool antialias = true);

/// Cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) for [0,1] data after cropping `border` pixels from each
/// side; +inf when the inputs are identical.
double psnr(const Tensor<float>& a, const Tensor<float>& b, int border = 0);

/// Dihedral group element t in 0..7: optional horizontal mirror (t >= 4)
/// followed by t % 4 counter-clockwise quarter turns.
Tensor<float> apply_dihedral(const Tensor<float>& image, int t);
Tensor<float> invert_dihedral(const Tensor<float>& image, int t);

Tensor<float> crop(const Tensor<float>& image, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w);

/// Training pair at scale s. `lr` is the crop x crop window at (lr_y, lr_x) of
/// the bicubic-downscaled image; `hr` is a crop x crop window at absolute HR
/// coordinates (hr_y, hr_x), placed at (offset_y, offset_x) inside the HR
/// region whose pixels map back into the LR window.
struct CropPair {
    Image lr;
    Image hr;
    double scale = 1.0;
    std::int64_t lr_y = 0, lr_x = 0;
    std::int64_t hr_y = 0, hr_x = 0;
    std::int64_t offset_y = 0, offset_x = 0;
};

CropPair random_crop_pair(const Image& hr, double s, std::int64_t crop_size, Rng& rng);

/// Same as random_crop_pair with the LR image already synthesized.
CropPair random_crop_pair(const Image& hr, const Image& lr_full, double s, std::int64_t crop_size, Rng& rng);

/// First target index whose source (floor(t/s)) is >= `source`.
std::int64_t first_target_of(std::int64_t source, double s);

} // namespace cufsr
