#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "cufsr/grid.hpp"
#include "cufsr/imaging.hpp"
#include "cufsr/posenc.hpp"
#include "cufsr/rng.hpp"
#include "test_util.hpp"

using namespace cufsr;
using cufsr::testing::max_abs_diff;
using cufsr::testing::random_tensor;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / ("cufsr_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

} // namespace

TEST(Png, RoundTripQuantizesToEightBits) {
    Rng rng(1);
    auto img = random_tensor(Shape{5, 7, 3}, rng, -0.2, 1.2);
    const auto path = temp_dir("png") / "a.png";
    save_png(img, path);
    auto back = load_png(path);
    ASSERT_EQ(back.shape(), img.shape());
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        const double q = std::round(std::clamp(double(img[i]), 0.0, 1.0) * 255.0) / 255.0;
        EXPECT_NEAR(back[i], q, 1e-7);
    }
    // a second pass is lossless
    save_png(back, path);
    EXPECT_EQ(load_png(path), back);
}

TEST(Png, MissingFileAndBadShape) {
    EXPECT_THROW(load_png("/nonexistent/x.png"), ImageIoError);
    EXPECT_THROW(save_png(Tensor<float>(Shape{2, 2, 1}), temp_dir("png2") / "b.png"), ShapeError);
}

TEST(Color, LumaFormula) {
    Image px(Shape{1, 1, 3}, std::vector<float>{0.2f, 0.5f, 0.9f});
    const double expect = (65.481 * 0.2 + 128.553 * 0.5 + 24.966 * 0.9 + 16.0) / 255.0;
    EXPECT_NEAR(rgb_to_y(px)[0], expect, 1e-6);
    EXPECT_NEAR(rgb_to_y(Image(Shape{1, 1, 3}, 0.0f))[0], 16.0 / 255.0, 1e-7);
    EXPECT_NEAR(rgb_to_y(Image(Shape{1, 1, 3}, 1.0f))[0], 235.0 / 255.0, 1e-6);
}

TEST(Bicubic, KernelValues) {
    EXPECT_DOUBLE_EQ(cubic_kernel(0.0), 1.0);
    EXPECT_DOUBLE_EQ(cubic_kernel(1.0), 0.0);
    EXPECT_DOUBLE_EQ(cubic_kernel(2.0), 0.0);
    EXPECT_DOUBLE_EQ(cubic_kernel(0.5), 0.5625);
    EXPECT_DOUBLE_EQ(cubic_kernel(-1.5), -0.0625);
    // partition of unity at any phase
    for (double f : {0.0, 0.1, 0.37, 0.5, 0.9}) {
        double sum = 0;
        for (int k = -2; k <= 2; ++k) sum += cubic_kernel(f + k);
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Bicubic, SizesIdentityAndConstants) {
    Rng rng(2);
    auto img = random_tensor(Shape{10, 9, 3}, rng, 0, 1);
    EXPECT_EQ(bicubic_resize(img, 2.2, 2.2).shape(), (Shape{22, 19, 3}));
    EXPECT_EQ(bicubic_resize(img, 0.5, 0.5).shape(), (Shape{5, 4, 3}));
    EXPECT_LT(max_abs_diff(bicubic_resize(img, 1.0, 1.0), img), 1e-6);
    Image flat(Shape{8, 8, 3}, 0.3f);
    for (double s : {0.25, 0.5, 1.7, 3.0}) {
        auto out = bicubic_resize(flat, s, s);
        for (float v : out.data()) EXPECT_NEAR(v, 0.3f, 1e-6);
    }
}

TEST(Bicubic, ReproducesLinearRampAwayFromEdges) {
    // cubic convolution with a = -0.5 is exact on linear functions
    const std::int64_t n = 12;
    Tensor<float> ramp(Shape{1, n, 1});
    for (std::int64_t x = 0; x < n; ++x) ramp[x] = static_cast<float>(0.05 * x);
    for (double s : {2.0, 3.0, 2.5}) {
        auto out = bicubic_resize(ramp, 1.0, s);
        for (std::int64_t o = 0; o < out.dim(1); ++o) {
            const double src = (o + 0.5) / s - 0.5;
            if (src < 2.0 || src > n - 3.0) continue;
            EXPECT_NEAR(out[o], 0.05 * src, 1e-5) << "s=" << s << " o=" << o;
        }
    }
}

TEST(Psnr, KnownValues) {
    Image a(Shape{4, 4, 3}, 0.5f);
    EXPECT_EQ(psnr(a, a), kPsnrInfinity);
    Image b(Shape{4, 4, 3}, 0.6f);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-4);  // MSE 0.01
    Image c = a;
    c.at(0, 0, 0) = 1.0f;
    EXPECT_EQ(psnr(a, c, 1), kPsnrInfinity);
    EXPECT_THROW(psnr(a, Image(Shape{3, 4, 3})), ShapeError);
}

TEST(Dihedral, RoundTripsAndGroupStructure) {
    Rng rng(3);
    auto img = random_tensor(Shape{3, 5, 2}, rng);
    for (int t = 0; t < 8; ++t) EXPECT_EQ(invert_dihedral(apply_dihedral(img, t), t), img) << "t=" << t;
    EXPECT_EQ(apply_dihedral(apply_dihedral(img, 1), 1), apply_dihedral(img, 2));
    EXPECT_EQ(apply_dihedral(apply_dihedral(img, 2), 2), img);
    EXPECT_EQ(apply_dihedral(apply_dihedral(img, 4), 4), img);
    // t = 5 is mirror then one quarter turn
    EXPECT_EQ(apply_dihedral(img, 5), apply_dihedral(apply_dihedral(img, 4), 1));
    // counter-clockwise: in(r, c) lands at (W-1-c, r)
    auto rot = apply_dihedral(img, 1);
    ASSERT_EQ(rot.shape(), (Shape{5, 3, 2}));
    EXPECT_EQ(rot.at(5 - 1 - 4, 0, 1), img.at(0, 4, 1));
    auto mir = apply_dihedral(img, 4);
    EXPECT_EQ(mir.at(1, 0, 0), img.at(1, 4, 0));
    EXPECT_THROW(apply_dihedral(img, 8), std::invalid_argument);
}

TEST(Grid, SubpixelCoordinates) {
    for (int s = 1; s <= 4; ++s)
        for (int t = 0; t < 3 * s; ++t) {
            auto c = subpixel_coord(t, s);
            EXPECT_EQ(c.source, t / s);
            EXPECT_EQ(c.delta, static_cast<double>(t % s) / s);  // bit exact
        }
    auto c = subpixel_coord(3, 2.5);
    EXPECT_EQ(c.source, 1);
    EXPECT_NEAR(c.delta, 0.2, 1e-12);
    for (int t = 0; t < 100; ++t) {
        auto d = subpixel_coord(t, 2.7).delta;
        EXPECT_GE(d, 0.0);
        EXPECT_LT(d, 1.0);
    }
    EXPECT_EQ(scaled_extent(10, 2.2), 22);
    EXPECT_EQ(scaled_extent(16, 2.5), 40);
    EXPECT_EQ(scaled_extent(7, 1.0 / 3.0), 2);
}

TEST(CropPair, TargetsMapIntoTheLrWindow) {
    Rng rng(4);
    auto hr = random_tensor(Shape{40, 36, 3}, rng, 0, 1);
    for (int trial = 0; trial < 40; ++trial) {
        const double s = rng.uniform(1.0, 4.0);
        auto pair = random_crop_pair(hr, s, 6, rng);
        const auto lr_full = bicubic_resize(hr, 1.0 / s, 1.0 / s);
        EXPECT_EQ(pair.lr, crop(lr_full, pair.lr_y, pair.lr_x, 6, 6));
        EXPECT_EQ(pair.hr, crop(hr, pair.hr_y, pair.hr_x, 6, 6));
        for (std::int64_t t = pair.hr_y; t < pair.hr_y + 6; ++t) {
            const auto src = subpixel_coord(t, s).source;
            EXPECT_GE(src, pair.lr_y);
            EXPECT_LT(src, pair.lr_y + 6);
        }
        for (std::int64_t t = pair.hr_x; t < pair.hr_x + 6; ++t) {
            const auto src = subpixel_coord(t, s).source;
            EXPECT_GE(src, pair.lr_x);
            EXPECT_LT(src, pair.lr_x + 6);
        }
    }
    EXPECT_THROW(random_crop_pair(hr, 4.0, 12, rng), std::invalid_argument);
}

TEST(PositionalEncoding, WidthsAndDctFormula) {
    EncodingConfig dct{5, 2.0, EncodingKind::Dct};
    EncodingConfig fourier{5, 2.0, EncodingKind::Fourier};
    EXPECT_EQ(dct.width_2d(), 25);
    EXPECT_EQ(fourier.width_2d(), 50);
    auto f = frequencies(dct);
    ASSERT_EQ(f.size(), 5u);
    for (int n = 0; n < 5; ++n) EXPECT_DOUBLE_EQ(f[n], 0.5 * n);
    const double z = 0.3;
    auto e = encode_scalar(z, dct);
    for (int n = 0; n < 5; ++n) EXPECT_NEAR(e[n], std::cos((2 * z + 1) * f[n] * std::numbers::pi / 2), 1e-12);
    auto e2 = encode_2d(0.3, 0.7, dct);
    auto ey = encode_scalar(0.7, dct);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) EXPECT_NEAR(e2[i * 5 + j], e[i] * ey[j], 1e-12);
    EXPECT_THROW(encoding_kind_from_string("wavelet"), std::invalid_argument);
}

TEST(PositionalEncoding, FourierIsTheComplexProduct) {
    EncodingConfig fc{3, 1.5, EncodingKind::Fourier};
    auto ex = encode_scalar(0.25, fc), ey = encode_scalar(0.6, fc), e2 = encode_2d(0.25, 0.6, fc);
    ASSERT_EQ(e2.size(), 18u);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double re = ex[2 * i] * ey[2 * j] - ex[2 * i + 1] * ey[2 * j + 1];
            const double im = ex[2 * i] * ey[2 * j + 1] + ex[2 * i + 1] * ey[2 * j];
            EXPECT_NEAR(e2[2 * (i * 3 + j)], re, 1e-12);
            EXPECT_NEAR(e2[2 * (i * 3 + j) + 1], im, 1e-12);
        }
}

TEST(Rng, DeterministicBoundedAndForked) {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        const auto k = r.uniform_int(-2, 3);
        EXPECT_GE(k, -2);
        EXPECT_LE(k, 3);
    }
    Rng base(9);
    EXPECT_NE(base.fork(1).next(), base.fork(2).next());
    EXPECT_EQ(base.fork(1).next(), Rng(9).fork(1).next());
}
