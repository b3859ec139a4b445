#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "cufsr/eval.hpp"
#include "cufsr/ops.hpp"
#include "test_util.hpp"

using namespace cufsr;
using cufsr::testing::max_abs_diff;
using cufsr::testing::random_tensor;

namespace {

CostQuery query(CostHead head, std::int64_t hw, double s, int c, int k, int n_out = 0) {
    CostQuery q;
    q.head = head;
    q.height = q.width = hw;
    q.scale = s;
    q.channels = c;
    q.kernel = k;
    q.n_out = n_out > 0 ? n_out : c;
    return q;
}

void expect_same_counts(const CostReport& a, const CostReport& b) {
    ASSERT_EQ(a.stages.size(), b.stages.size());
    for (std::size_t i = 0; i < a.stages.size(); ++i) {
        EXPECT_EQ(a.stages[i].name, b.stages[i].name);
        EXPECT_EQ(a.stages[i].mults, b.stages[i].mults) << a.stages[i].name;
    }
}

std::vector<double> eigen_cov_spectrum(const std::vector<double>& rows, int n, int d) {
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rows[i * d + j];
    Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd cov = centred.transpose() * centred / double(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + d);
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

} // namespace

TEST(Cost, PerPixelRatioAgainstSubPixel) {
    for (int C : {8, 64})
        for (int K : {1, 3, 5})
            for (int s : {2, 3, 4}) {
                auto cuf = count_mults(query(CostHead::CufInstantiated, 16, s, C, K));
                auto sub = count_mults(query(CostHead::SubPixel, 16, s, C, K));
                const auto num = cuf.stage_mults("depthwise") + cuf.stage_mults("dense");
                const auto den = sub.stage_mults("expansion");
                // num / den == (K^2 + C) / (K^2 C), compared without rounding
                EXPECT_EQ(num * K * K * C, den * (K * K + C)) << "C=" << C << " K=" << K;
            }
    auto cuf = count_mults(query(CostHead::CufInstantiated, 1, 1, 64, 3));
    auto sub = count_mults(query(CostHead::SubPixel, 1, 1, 64, 3));
    EXPECT_EQ((cuf.stage_mults("depthwise") + cuf.stage_mults("dense")) * 576, sub.stage_mults("expansion") * 73);
}

TEST(Cost, HandCountedStages) {
    auto q = query(CostHead::CufInstantiated, 8, 3, 8, 3);
    q.encoder_blocks = 2;
    auto r = count_mults(q);
    EXPECT_EQ(r.stage_mults("encoder"), 64 * 9 * (3 * 8 + 5 * 8 * 8));
    EXPECT_EQ(r.stage_mults("hypernetwork"), 0);
    EXPECT_EQ(r.stage_mults("depthwise"), 24 * 24 * 8 * 9);
    EXPECT_EQ(r.stage_mults("dense"), 24 * 24 * 8 * 8);
    EXPECT_EQ(r.stage_mults("projection"), 24 * 24 * 8 * 3);
    EXPECT_EQ(r.total_mults(), 198144 + 41472 + 36864 + 13824);

    auto c = count_mults(query(CostHead::CufContinuous, 16, 2.5, 8, 3));
    EXPECT_EQ(c.out_height, 40);
    EXPECT_EQ(c.unique_offsets, 25);
    EXPECT_EQ(c.stage_mults("hypernetwork"), 25 * 9 * (59 * 32 + 32 * 32 + 32 * 32 + 32 * 8));

    auto s = count_mults(query(CostHead::SubPixel, 4, 2, 4, 3, 5));
    EXPECT_EQ(s.stage_mults("expansion"), 16 * 9 * 4 * 4 * 5);
    EXPECT_EQ(s.stage_mults("projection"), 64 * 5 * 3);

    EXPECT_THROW(count_mults(query(CostHead::CufInstantiated, 8, 2.5, 8, 3)), std::invalid_argument);
    EXPECT_THROW(count_mults(query(CostHead::SubPixel, 8, 1.5, 8, 3)), std::invalid_argument);
}

TEST(Cost, InstrumentedEqualsClosedForm) {
    std::vector<CostQuery> qs{
        query(CostHead::CufInstantiated, 6, 3, 8, 3), query(CostHead::CufInstantiated, 5, 2, 1, 1),
        query(CostHead::CufContinuous, 6, 2.5, 8, 3), query(CostHead::CufContinuous, 5, 1.7, 4, 5),
        query(CostHead::SubPixel, 6, 2, 8, 3, 8),     query(CostHead::SubPixel, 4, 3, 1, 1, 1),
    };
    qs[0].encoder_blocks = 1;
    qs[2].encoder_blocks = 0;
    for (const auto& q : qs) {
        std::int64_t whole = -1;
        auto measured = instrumented_mults(q, 3, &whole);
        auto analytic = count_mults(q);
        expect_same_counts(measured, analytic);
        EXPECT_EQ(whole, analytic.total_mults()) << to_string(q.head);
    }
}

TEST(Cost, PeakMemoryAndCsv) {
    auto r = count_mults(query(CostHead::CufInstantiated, 4, 2, 2, 3));
    // the last ReLU output [8,8,2] is still live when the RGB output [8,8,3] is allocated
    EXPECT_EQ(r.peak_elems(), 128 + 192);
    const auto csv = r.csv();
    EXPECT_EQ(csv.rfind("# multiplications only", 0), 0u);
    EXPECT_NE(csv.find("stage,mults,peak_elems"), std::string::npos);
    EXPECT_NE(csv.find("total," + std::to_string(r.total_mults())), std::string::npos);
    EXPECT_EQ(cost_head_from_string("subpixel"), CostHead::SubPixel);
    EXPECT_THROW(cost_head_from_string("dense"), std::invalid_argument);
}

TEST(Pca, SymmetricEigenvaluesMatchEigen) {
    Rng rng(1);
    const int n = 7;
    std::vector<double> a(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) a[i * n + j] = a[j * n + i] = rng.uniform(-1, 1);
    auto ours = symmetric_eigenvalues(a, n);
    Eigen::MatrixXd m = Eigen::Map<Eigen::MatrixXd>(a.data(), n, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    std::vector<double> ref(es.eigenvalues().data(), es.eigenvalues().data() + n);
    std::sort(ref.rbegin(), ref.rend());
    for (int i = 0; i < n; ++i) EXPECT_NEAR(ours[i], ref[i], 1e-10);
}

TEST(Pca, RowSpectrumMatchesCovariance) {
    Rng rng(2);
    for (auto [n, d] : {std::pair{9, 4}, std::pair{4, 9}, std::pair{9, 9}}) {
        std::vector<double> rows(n * d);
        for (auto& v : rows) v = rng.uniform(-1, 1);
        auto g = row_pca(rows, n, d);
        ASSERT_EQ(g.eigenvalues.size(), std::size_t(n));
        auto ref = eigen_cov_spectrum(rows, n, d);
        for (int i = 0; i < std::min(n, d); ++i) EXPECT_NEAR(g.eigenvalues[i], ref[i], 1e-10);
        for (int i = std::min(n, d); i < n; ++i) EXPECT_NEAR(g.eigenvalues[i], 0.0, 1e-10);
        const double trace = std::accumulate(ref.begin(), ref.end(), 0.0);
        EXPECT_NEAR(g.total_variance, trace, 1e-10);
        EXPECT_NEAR(std::accumulate(g.eigenvalues.begin(), g.eigenvalues.end(), 0.0), trace, 1e-10 * trace);
        EXPECT_DOUBLE_EQ(g.cumvar.back(), 1.0);
        EXPECT_TRUE(std::is_sorted(g.cumvar.begin(), g.cumvar.end()));
    }
}

TEST(Pca, DegenerateRows) {
    std::vector<double> same{1, 2, 3, 1, 2, 3, 1, 2, 3};
    auto g = row_pca(same, 3, 3);
    EXPECT_EQ(g.total_variance, 0.0);
    for (double e : g.eigenvalues) EXPECT_NEAR(e, 0.0, 1e-15);

    // rows a_i * v: a single component of variance var(a) |v|^2
    const std::vector<double> a{-1, 0, 2, 3}, v{1, 2, 2};
    std::vector<double> rank1;
    for (double ai : a)
        for (double vj : v) rank1.push_back(ai * vj);
    auto r = row_pca(rank1, 4, 3);
    const double var = (4 + 1 + 1 + 4) / 3.0;  // mean of a is 1
    EXPECT_NEAR(r.eigenvalues[0], var * 9.0, 1e-10);
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(r.eigenvalues[i], 0.0, 1e-10);
    EXPECT_NEAR(r.cumvar[0], 1.0, 1e-12);
    EXPECT_THROW(row_pca({1, 2}, 1, 2), std::invalid_argument);
}

TEST(Pca, GroupsFollowHeadLayout) {
    ModelConfig cfg;
    cfg.encoder = {4, 1, 3};
    cfg.cuf.channels = 4;
    cfg.cuf.hidden = 8;
    auto m = SrModel<float>::create(cfg, 1);
    auto rep = filter_pca(m, 3);
    EXPECT_EQ(rep.mode, "cuf");
    ASSERT_EQ(rep.groups.size(), 4u);
    for (const auto& g : rep.groups) EXPECT_EQ(g.eigenvalues.size(), 9u);

    // channel 0 of the bank is identical across offsets, channel 1 is not
    InstantiatedKernels<float> k{2, Tensor<float>(Shape{4, 9, 2})};
    Rng rng(3);
    for (int g = 0; g < 4; ++g)
        for (int t = 0; t < 9; ++t) {
            k.weights[(g * 9 + t) * 2 + 0] = static_cast<float>(t);
            k.weights[(g * 9 + t) * 2 + 1] = static_cast<float>(rng.uniform(-1, 1));
        }
    auto cr = filter_pca_cuf(k);
    EXPECT_EQ(cr.groups[0].total_variance, 0.0);
    EXPECT_GT(cr.groups[1].total_variance, 0.0);

    // sub-pixel: group n holds filters n*s^2 .. n*s^2 + s^2 - 1
    const int s = 2, N = 3, C = 2;
    auto w = random_tensor(Shape{s * s * N, C, 3, 3}, rng);
    for (int g = 0; g < s * s; ++g)
        for (int i = 0; i < C * 9; ++i) w[(1 * s * s + g) * C * 9 + i] = static_cast<float>(i);
    auto sr = filter_pca_subpixel(w, s);
    ASSERT_EQ(sr.groups.size(), 3u);
    EXPECT_EQ(sr.groups[0].eigenvalues.size(), 4u);
    EXPECT_EQ(sr.groups[1].total_variance, 0.0);
    EXPECT_GT(sr.groups[2].total_variance, 0.0);
    EXPECT_EQ(sr.csv().substr(0, 29), "group,index,eigenvalue,cumvar");
}

TEST(GeoEnsemble, MatchesLoopOracle) {
    Rng rng(4);
    auto lr = random_tensor(Shape{5, 7, 3}, rng, 0, 1);
    auto up = bicubic_upscaler();
    auto got = geo_ensemble(up, lr, 2.0);
    Tensor<double> acc(Shape{10, 14, 3});
    for (int t = 0; t < 8; ++t) {
        auto y = invert_dihedral(up(apply_dihedral(lr, t), 2.0), t);
        for (std::int64_t i = 0; i < acc.numel(); ++i) acc[i] += y[i] / 8.0;
    }
    ASSERT_EQ(got.shape(), acc.shape());
    for (std::int64_t i = 0; i < acc.numel(); ++i) EXPECT_NEAR(got[i], acc[i], 1e-6);
}

TEST(GeoEnsemble, EquivariantModelIsAFixedPoint) {
    Upscaler nearest = [](const Image& lr, double s) { return nearest_sample(Var<float>(lr), s, s).value(); };
    Rng rng(5);
    auto lr = random_tensor(Shape{4, 6, 3}, rng, 0, 1);
    EXPECT_LT(max_abs_diff(geo_ensemble(nearest, lr, 3.0), nearest(lr, 3.0)), 1e-6);
}

TEST(PsnrEval, BicubicOnCheckerboard) {
    Dataset hr;
    Image board(Shape{12, 12, 3});
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
            for (int c = 0; c < 3; ++c) board.at(y, x, c) = ((y / 2 + x / 2) % 2) ? 0.9f : 0.1f;
    hr.names = {"board"};
    hr.images = {board};
    auto table = psnr_eval(bicubic_upscaler(), hr, nullptr, {2.0, 3.0}, ColorSpace::Rgb);
    ASSERT_EQ(table.rows.size(), 2u);
    for (double s : {2.0, 3.0}) {
        auto sr = bicubic_resize(bicubic_resize(board, 1 / s, 1 / s), s, s);
        for (auto& v : sr.data()) v = std::clamp(v, 0.0f, 1.0f);
        const double expect = psnr(sr, crop(board, 0, 0, sr.dim(0), sr.dim(1)));
        EXPECT_NEAR(table.mean(s), expect, 1e-9);
    }
    auto y = psnr_eval(bicubic_upscaler(), hr, nullptr, {2.0}, ColorSpace::Y);
    EXPECT_NE(y.mean(2.0), table.mean(2.0));
    auto bordered = psnr_eval(bicubic_upscaler(), hr, nullptr, {2.0}, ColorSpace::Rgb, 2);
    EXPECT_NE(bordered.mean(2.0), table.mean(2.0));

    const auto csv = table.csv();
    EXPECT_EQ(csv.rfind("image,scale,psnr\n", 0), 0u);
    EXPECT_NE(csv.find("\nmean,"), std::string::npos);
    EXPECT_THROW(psnr_eval(bicubic_upscaler(), hr, &hr, {2.0, 3.0}, ColorSpace::Rgb), std::invalid_argument);
    EXPECT_EQ(color_space_from_string("Y"), ColorSpace::Y);
    EXPECT_THROW(color_space_from_string("lab"), std::invalid_argument);
}

TEST(PsnrEval, ExplicitLowResInputs) {
    Dataset hr, lr;
    Rng rng(6);
    hr.names = lr.names = {"a"};
    hr.images = {random_tensor(Shape{8, 8, 3}, rng, 0, 1)};
    lr.images = {bicubic_resize(hr.images[0], 0.5, 0.5)};
    auto a = psnr_eval(bicubic_upscaler(), hr, &lr, {2.0}, ColorSpace::Rgb);
    auto b = psnr_eval(bicubic_upscaler(), hr, nullptr, {2.0}, ColorSpace::Rgb);
    EXPECT_DOUBLE_EQ(a.mean(2.0), b.mean(2.0));
}
