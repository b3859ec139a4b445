// One PASS/FAIL line per acceptance criterion. Criterion 8 analyzes the
// checkpoint trained by criterion 6.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "cufsr/eval.hpp"
#include "cufsr/grid.hpp"
#include "cufsr/io.hpp"
#include "cufsr/ops.hpp"
#include "cufsr/train.hpp"

using namespace cufsr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

template <typename T = float>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

double max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
    if (a.shape() != b.shape()) return INFINITY;
    double m = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

ModelConfig toy_model() {
    ModelConfig m;
    m.encoder = {16, 3, 3};
    m.cuf.channels = 16;
    return m;
}

TrainConfig toy_train(int epochs) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch = 4;
    t.crop = 12;
    t.lr_initial = 1e-3;
    t.milestones = {100, 160, 180, 190};
    t.crops_per_image_per_epoch = 10;
    t.scale_min = 1.0;
    t.scale_max = 4.0;
    t.seed = 0;
    t.eval_every = std::max(1, epochs);
    t.eval_scales = {2.0, 3.0};
    return t;
}

const Dataset& toy_train_set() {
    static const Dataset d = synthetic_dataset(32, 64, 7);
    return d;
}

const Dataset& toy_eval_set() {
    static const Dataset d = synthetic_dataset(8, 64, 99);
    return d;
}

fs::path toy_checkpoint_path() { return fs::current_path() / "acceptance_toy.cuf"; }

// --- 1 -------------------------------------------------------------------------

Outcome instantiation_equivalence() {
    double worst = 0.0;
    Rng rng(2024);
    for (int seed = 0; seed < 20; ++seed) {
        const auto model = SrModel<float>::create(ModelConfig{}, static_cast<std::uint64_t>(seed));
        const auto& cfg = model.config;
        const auto p = Binding<float>::constants(model.params);
        const Image lr = random_tensor(Shape{16, 16, 3}, rng, 0.0, 1.0);
        const Var<float> feats = encode(cfg.encoder, p, Var<float>(lr));
        const Var<float> unfolded = unfold(feats, cfg.cuf.kernel);
        for (int s = 1; s <= 4; ++s) {
            const auto kernels = instantiate(cfg.cuf, p, s);
            const auto a = decode_instantiated(cfg.cuf, p, kernels, feats).value();
            const auto b = decode_continuous(cfg.cuf, p, unfolded, s, s).value();
            worst = std::max(worst, max_abs_diff(a, b));
        }
    }
    return {worst <= 1e-5, "20 models x s=1..4, max |instantiated - continuous| = " + fmt("%.3g", worst)};
}

// --- 2 -------------------------------------------------------------------------

Outcome multiply_counts() {
    bool ok = true;
    std::ostringstream detail;
    auto check = [&](const CostQuery& q) {
        std::int64_t whole = -1;
        const auto measured = instrumented_mults(q, 7, &whole);
        const auto analytic = count_mults(q);
        bool same = measured.stages.size() == analytic.stages.size() && whole == analytic.total_mults();
        for (std::size_t i = 0; same && i < analytic.stages.size(); ++i)
            same = measured.stages[i].name == analytic.stages[i].name && measured.stages[i].mults == analytic.stages[i].mults;
        if (!same) {
            ok = false;
            detail << " mismatch for " << to_string(q.head) << " C=" << q.channels << " K=" << q.kernel << ";";
        }
        return measured;
    };
    for (int C : {8, 64})
        for (int K : {1, 3, 5}) {
            CostQuery q;
            q.height = q.width = 8;
            q.scale = 2;
            q.channels = C;
            q.kernel = K;
            q.n_out = C;
            q.head = CostHead::CufInstantiated;
            const auto cuf = check(q);
            q.head = CostHead::SubPixel;
            const auto sub = check(q);
            const std::int64_t num = cuf.stage_mults("depthwise") + cuf.stage_mults("dense");
            const std::int64_t den = sub.stage_mults("expansion");
            const std::int64_t rn = K * K + C, rd = K * K * C;
            if (num * rd != den * rn) {
                ok = false;
                detail << " ratio for C=" << C << " K=" << K << " is " << num << "/" << den << ";";
            }
            if (C == 64 && K == 3) detail << " C=64 K=3 per-pixel ratio " << num / std::gcd(num, den) << "/" << den / std::gcd(num, den) << ";";
        }
    CostQuery cont;
    cont.head = CostHead::CufContinuous;
    cont.height = cont.width = 8;
    cont.scale = 2.5;
    cont.channels = 8;
    cont.encoder_blocks = 1;
    check(cont);
    CostQuery inst = cont;
    inst.head = CostHead::CufInstantiated;
    inst.scale = 3;
    check(inst);
    return {ok, "instrumented == analytic for 14 configurations;" + detail.str()};
}

// --- 3 -------------------------------------------------------------------------

Outcome parameter_counts() {
    const auto model = SrModel<float>::create(ModelConfig{}, 0);
    std::int64_t field = 0, dense = 0;
    for (const auto& p : model.params) {
        if (p.name.rfind("head.field.", 0) == 0) field += p.value.numel();
        if (p.name.rfind("head.dense", 0) == 0) dense += p.value.numel();
    }
    const bool ok = field == 6144 && dense == 4355 && KernelFieldConfig{}.param_count() == 6144 &&
                    cuf_dense_param_count(64) == 4355;
    return {ok, "kernel field " + std::to_string(field) + ", dense " + std::to_string(dense)};
}

// --- 4 -------------------------------------------------------------------------

Outcome gradient_check() {
    ModelConfig cfg;
    cfg.encoder = {8, 2, 3};
    cfg.cuf.channels = 8;
    cfg.cuf.hidden = 16;
    auto model = SrModel<double>::create(cfg, 11);
    Rng rng(12);
    const auto lr = random_tensor<double>(Shape{8, 8, 3}, rng, 0.0, 1.0);
    const double s = 2.5;
    const auto out_shape = Shape{20, 20, 3};
    const auto weights = random_tensor<double>(out_shape, rng);

    auto objective = [&](const Binding<double>& p) {
        const auto feats = featurize(cfg.encoder, p, Var<double>(lr), cfg.cuf.kernel);
        return sum(mul(decode_continuous(cfg.cuf, p, feats, s, s), Var<double>(weights)));
    };
    model.params.zero_grad();
    {
        Tape<double> tape;
        const auto p = Binding<double>::on_tape(tape, model.params);
        backward(objective(p), tape, model.params);
    }
    auto at = [&](Parameter<double>& par, std::int64_t i, double v) {
        par.value[i] = v;
        return objective(Binding<double>::constants(model.params)).value().item();
    };
    // Ridders extrapolation of central differences; steps shrink past nearby ReLU kinks
    auto ridders = [&](Parameter<double>& par, std::int64_t i) {
        const double v = par.value[i];
        constexpr int ntab = 7;
        double tab[ntab][ntab];
        double h = 1e-4, best = 0.0, err = std::numeric_limits<double>::max();
        for (int r = 0; r < ntab; ++r, h /= 2) {
            tab[0][r] = (at(par, i, v + h) - at(par, i, v - h)) / (2 * h);
            double fac = 4.0;
            for (int j = 1; j <= r; ++j, fac *= 4) {
                tab[j][r] = (tab[j - 1][r] * fac - tab[j - 1][r - 1]) / (fac - 1);
                const double e = std::max(std::abs(tab[j][r] - tab[j - 1][r]), std::abs(tab[j][r] - tab[j - 1][r - 1]));
                if (e <= err) {
                    err = e;
                    best = tab[j][r];
                }
            }
        }
        par.value[i] = v;
        return best;
    };
    double worst = 0.0;
    std::int64_t checked = 0;
    std::string worst_name;
    for (auto& par : model.params) {
        for (std::int64_t i = 0; i < par.value.numel(); ++i) {
            const double fd = ridders(par, i);
            const double g = par.grad[i];
            const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-8});
            if (rel > worst) {
                worst = rel;
                worst_name = par.name + "[" + std::to_string(i) + "]";
            }
            ++checked;
        }
    }
    return {worst <= 1e-4, std::to_string(checked) + " parameters (C=8, B=2, hidden 16, 8x8 input, s=2.5), worst relative error " +
                               fmt("%.3g", worst) + " at " + worst_name};
}

// --- 5 -------------------------------------------------------------------------

Outcome encoding_widths() {
    std::ostringstream detail;
    bool ok = true;
    Rng probe_rng(5);
    std::vector<std::size_t> probe_idx;
    for (std::size_t i = 0; i < 8; ++i) probe_idx.push_back(i);
    auto probe_cfg = toy_train(1);
    const auto probe = sample_batch(toy_train_set(), probe_idx, probe_cfg, probe_rng);

    for (auto kind : {EncodingKind::Dct, EncodingKind::Fourier}) {
        ModelConfig cfg = toy_model();
        cfg.cuf.delta.kind = cfg.cuf.scale.kind = cfg.cuf.kidx.kind = kind;
        auto model = SrModel<float>::create(cfg, 1);
        const auto width = model.params.at("head.field.layer0.weight").value.dim(0);
        const std::int64_t expect = kind == EncodingKind::Dct ? 59 : 118;
        const double before = batch_loss_and_grad(model, probe, false);
        auto result = train(toy_train_set(), nullptr, model, toy_train(1));
        const double after = batch_loss_and_grad(result.model, probe, false);
        bool finite = std::isfinite(result.log.back().train_l1);
        for (const auto& p : result.model.params) finite = finite && p.value.all_finite();
        const bool good = width == expect && finite && after < before;
        ok = ok && good;
        detail << to_string(kind) << ": input width " << width << ", probe L1 " << fmt("%.4f", before) << " -> "
               << fmt("%.4f", after) << "; ";
    }
    return {ok, detail.str()};
}

// --- 6 -------------------------------------------------------------------------

Outcome toy_training() {
    const auto init = SrModel<float>::create(toy_model(), 1);
    const auto cfg = toy_train(200);
    auto result = train(toy_train_set(), nullptr, init, cfg, [](const EpochMetrics& m) {
        if (m.epoch % 20 == 0) std::fprintf(stderr, "  epoch %d train L1 %.4f\n", m.epoch, m.train_l1);
    });
    save_checkpoint(toy_checkpoint_path(), result.model, &result.adam);
    const std::vector<double> scales{2.0, 3.0};
    const auto model_table = psnr_eval(model_upscaler(result.model), toy_eval_set(), nullptr, scales, ColorSpace::Rgb);
    const auto bicubic_table = psnr_eval(bicubic_upscaler(), toy_eval_set(), nullptr, scales, ColorSpace::Rgb);
    const double m2 = model_table.mean(2.0), m3 = model_table.mean(3.0);
    const double b2 = bicubic_table.mean(2.0), b3 = bicubic_table.mean(3.0);
    const bool ok = m2 >= b2 + 0.3 && m3 >= b3 + 0.1;
    return {ok, "x2 " + fmt("%.3f", m2) + " dB vs bicubic " + fmt("%.3f", b2) + " (" + fmt("%+.3f", m2 - b2) + "), x3 " +
                    fmt("%.3f", m3) + " vs " + fmt("%.3f", b3) + " (" + fmt("%+.3f", m3 - b3) + ")"};
}

// --- 7 -------------------------------------------------------------------------

Outcome property_suites() {
    Rng rng(77);
    std::ostringstream detail;
    bool ok = true;

    bool shuffle_ok = true;
    for (int s = 1; s <= 4; ++s) {
        const auto x = random_tensor(Shape{3, 5, 2 * s * s}, rng);
        const auto y = pixel_shuffle(Var<float>(x), s).value();
        std::set<float> in(x.data().begin(), x.data().end()), out(y.data().begin(), y.data().end());
        shuffle_ok = shuffle_ok && y.shape() == Shape{3 * s, 5 * s, 2} && in == out &&
                     pixel_unshuffle(Var<float>(y), s).value() == x;
    }
    detail << "pixel shuffle bijection " << (shuffle_ok ? "ok" : "FAILED") << "; ";

    double unfold_err = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int k = 1 + 2 * (trial % 3), cin = 1 + trial % 4, cout = 2 + trial % 3;
        const auto x = random_tensor(Shape{6, 5, cin}, rng);
        const auto w = random_tensor(Shape{cout, cin, k, k}, rng);
        const auto b = random_tensor(Shape{cout}, rng);
        Tensor<float> wm(Shape{cin * k * k, cout});
        for (int o = 0; o < cout; ++o)
            for (int i = 0; i < cin * k * k; ++i) wm[i * cout + o] = w[o * cin * k * k + i];
        const auto direct = conv2d(Var<float>(x), Var<float>(w), Var<float>(b), k / 2).value();
        const auto viaunfold = dense(unfold(Var<float>(x), k), Var<float>(wm), Var<float>(b)).value();
        unfold_err = std::max(unfold_err, max_abs_diff(direct, viaunfold));
    }
    const bool unfold_ok = unfold_err <= 1e-5;
    detail << "unfold+dense vs conv max diff " << fmt("%.2g", unfold_err) << "; ";

    bool dihedral_ok = true;
    for (int trial = 0; trial < 4; ++trial) {
        const auto img = random_tensor(Shape{3 + trial, 6 - trial, 3}, rng);
        for (int t = 0; t < 8; ++t) dihedral_ok = dihedral_ok && invert_dihedral(apply_dihedral(img, t), t) == img;
    }
    detail << "dihedral round trips " << (dihedral_ok ? "ok" : "FAILED") << "; ";

    ModelConfig small;
    small.encoder = {4, 1, 3};
    small.cuf.channels = 4;
    auto model = SrModel<float>::create(small, 3);
    auto adam = AdamState<float>::zeros_like(model.params);
    adam.step = 9;
    for (auto& m : adam.m) m = random_tensor(m.shape(), rng);
    for (auto& v : adam.v) v = random_tensor(v.shape(), rng, 0.0, 1.0);
    const auto bytes = encode_checkpoint(model, &adam);
    const auto back = decode_checkpoint(bytes);
    bool ck_ok = back.adam && back.adam->step == 9 && back.model.params.size() == model.params.size();
    for (std::size_t i = 0; ck_ok && i < model.params.size(); ++i) {
        const auto& a = model.params[i].value;
        ck_ok = std::memcmp(a.data().data(), back.model.params[i].value.data().data(), a.data().size_bytes()) == 0;
    }
    ck_ok = ck_ok && encode_checkpoint(back.model, &*back.adam) == bytes;
    detail << "checkpoint round trip " << (ck_ok ? "bit-exact" : "FAILED");

    ok = shuffle_ok && unfold_ok && dihedral_ok && ck_ok;
    return {ok, detail.str()};
}

// --- 8 -------------------------------------------------------------------------

Outcome filter_spectra() {
    if (!fs::exists(toy_checkpoint_path())) return {false, "no trained checkpoint (criterion 6 did not run)"};
    const auto trained = load_checkpoint(toy_checkpoint_path()).model;
    const auto untrained = SrModel<float>::create(trained.config, 1);
    const auto rep = filter_pca(trained, 3);
    const auto base = filter_pca(untrained, 3);
    const int C = trained.config.cuf.channels;
    bool ok = static_cast<int>(rep.groups.size()) == C;
    for (const auto& g : rep.groups) ok = ok && g.eigenvalues.size() == 9;

    // total variance straight from the kernel bank
    const auto kernels = instantiate(trained.config.cuf, Binding<float>::constants(trained.params), 3);
    double worst_trace = 0.0;
    for (int c = 0; c < C && ok; ++c) {
        double total = 0.0;
        for (int t = 0; t < 9; ++t) {
            double mean = 0.0, sq = 0.0;
            for (int g = 0; g < 9; ++g) mean += kernels.weights[(g * 9 + t) * C + c];
            mean /= 9;
            for (int g = 0; g < 9; ++g) {
                const double d = kernels.weights[(g * 9 + t) * C + c] - mean;
                sq += d * d;
            }
            total += sq / 8;
        }
        double eig = 0.0;
        for (double e : rep.groups[c].eigenvalues) eig += e;
        worst_trace = std::max(worst_trace, std::abs(eig - total) / std::max(total, 1e-300));
    }
    double curve_diff = 0.0, lead_trained = 0.0, lead_untrained = 0.0;
    for (int c = 0; c < C && ok; ++c) {
        for (int i = 0; i < 9; ++i) curve_diff = std::max(curve_diff, std::abs(rep.groups[c].cumvar[i] - base.groups[c].cumvar[i]));
        lead_trained += rep.groups[c].cumvar[0] / C;
        lead_untrained += base.groups[c].cumvar[0] / C;
    }
    ok = ok && worst_trace <= 1e-6 && curve_diff > 1e-3;
    return {ok, std::to_string(rep.groups.size()) + " groups x 9 eigenvalues, trace rel err " + fmt("%.2g", worst_trace) +
                    ", mean leading cumvar trained " + fmt("%.3f", lead_trained) + " vs untrained " +
                    fmt("%.3f", lead_untrained) + ", max curve diff " + fmt("%.3f", curve_diff)};
}

// --- 9 -------------------------------------------------------------------------

Outcome non_integer_scale() {
    const auto model = SrModel<float>::create(ModelConfig{}, 21);
    const auto& cfg = model.config;
    const auto p = Binding<float>::constants(model.params);
    Rng rng(22);
    const Image lr = random_tensor(Shape{16, 16, 3}, rng, 0.0, 1.0);
    const double s = 2.5;
    const Image out = upscale(model, lr, s, s);
    bool ok = out.shape() == Shape{40, 40, 3};

    const auto plan = full_decode_plan(16, 16, {s, s});
    for (const auto& d : plan.deltas) ok = ok && d[0] >= 0.0 && d[0] < 1.0 && d[1] >= 0.0 && d[1] < 1.0;
    for (int t = 0; t < 40; ++t) {
        const auto c = subpixel_coord(t, s);
        ok = ok && c.delta >= 0.0 && c.delta < 1.0;
    }

    // materialize U on the target grid, then filter pixel by pixel
    const Var<float> unfolded = featurize(cfg.encoder, p, Var<float>(lr), cfg.cuf.kernel);
    const Tensor<float> U = nearest_sample(unfolded, s, s).value();
    const std::int64_t C = cfg.cuf.channels, taps = cfg.cuf.kernel * cfg.cuf.kernel;
    Tensor<float> dw(Shape{40, 40, C});
    for (std::int64_t y = 0; y < 40; ++y)
        for (std::int64_t x = 0; x < 40; ++x) {
            const Pair delta{subpixel_coord(y, s).delta, subpixel_coord(x, s).delta};
            const auto k = kernel_full(cfg.cuf, p, delta, {s, s}).value();
            for (std::int64_t c = 0; c < C; ++c) {
                float acc = 0.0f;
                for (std::int64_t t = 0; t < taps; ++t) acc += U[(y * 40 + x) * C * taps + c * taps + t] * k[t * C + c];
                dw[(y * 40 + x) * C + c] = acc;
            }
        }
    const auto materialized = cuf_project(p, Var<float>(dw)).value();
    const double diff = max_abs_diff(out, materialized);
    ok = ok && diff <= 1e-6;
    return {ok, "16x16 -> " + std::to_string(out.dim(0)) + "x" + std::to_string(out.dim(1)) + ", " +
                    std::to_string(plan.deltas.size()) + " distinct offsets in [0,1), lazy vs materialized " +
                    fmt("%.3g", diff)};
}

} // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all{
        {1, "instantiation equivalence", 30, instantiation_equivalence},
        {2, "multiply counts", 10, multiply_counts},
        {3, "parameter counts", 1, parameter_counts},
        {4, "gradient check", 120, gradient_check},
        {5, "encoding widths", 60, encoding_widths},
        {6, "toy training vs bicubic", 1800, toy_training},
        {7, "property suites", 30, property_suites},
        {8, "filter spectra", 10, filter_spectra},
        {9, "non-integer scale", 10, non_integer_scale},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = r.pass && in_time;
        failures += !pass;
        std::printf("criterion %d %s: %s | %s | %.2fs (limit %.0fs)%s\n", c.id, c.name, pass ? "PASS" : "FAIL",
                    r.detail.c_str(), secs, c.budget_s, in_time ? "" : " over time");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
