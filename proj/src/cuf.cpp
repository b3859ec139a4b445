#include "cufsr/cuf.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "cufsr/encoder.hpp"
#include "cufsr/grid.hpp"

namespace cufsr {

int KernelFieldConfig::input_width() const { return delta.width_2d() + scale.width_2d() + kidx.width_2d(); }

std::int64_t KernelFieldConfig::param_count() const {
    std::int64_t n = 0;
    std::int64_t in = input_width();
    for (int l = 0; l < layers; ++l) {
        const std::int64_t out = l + 1 == layers ? channels : hidden;
        n += in * out + out;
        in = out;
    }
    return n;
}

void KernelFieldConfig::validate() const {
    delta.validate();
    scale.validate();
    kidx.validate();
    if (hidden < 1) throw std::invalid_argument("kernel field: hidden width must be >= 1");
    if (layers < 1) throw std::invalid_argument("kernel field: at least one layer required");
    if (channels < 1) throw std::invalid_argument("kernel field: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("kernel field: kernel size must be odd");
}

std::int64_t cuf_dense_param_count(int channels) {
    const std::int64_t C = channels;
    return C * C + C + C * 3 + 3;
}

template <typename T>
void init_cuf_head(ParameterSet<T>& params, const KernelFieldConfig& cfg, Rng& rng) {
    cfg.validate();
    std::int64_t in = cfg.input_width();
    for (int l = 0; l < cfg.layers; ++l) {
        const std::int64_t out = l + 1 == cfg.layers ? cfg.channels : cfg.hidden;
        const std::string name = "head.field.layer" + std::to_string(l);
        params.add(name + ".weight", uniform_init<T>(Shape{in, out}, in, rng));
        params.add(name + ".bias", uniform_init<T>(Shape{out}, in, rng));
        in = out;
    }
    const std::int64_t C = cfg.channels;
    params.add("head.dense1.weight", uniform_init<T>(Shape{C, C}, C, rng));
    params.add("head.dense1.bias", uniform_init<T>(Shape{C}, C, rng));
    params.add("head.dense2.weight", uniform_init<T>(Shape{C, 3}, C, rng));
    params.add("head.dense2.bias", uniform_init<T>(Shape{3}, C, rng));
}

NormalizedQuery normalize_inputs(Pair delta, Pair scale, std::array<int, 2> kidx, int kernel) {
    NormalizedQuery q;
    q.delta = delta;
    q.scale = {1.0 / scale[0], 1.0 / scale[1]};
    const double denom = kernel > 1 ? static_cast<double>(kernel - 1) : 0.0;
    q.kidx = {denom > 0 ? kidx[0] / denom : 0.0, denom > 0 ? kidx[1] / denom : 0.0};
    return q;
}

std::vector<double> field_input(const KernelFieldConfig& cfg, const NormalizedQuery& q) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(cfg.input_width()));
    append_encode_2d(q.delta[0], q.delta[1], cfg.delta, v);
    append_encode_2d(q.scale[0], q.scale[1], cfg.scale, v);
    append_encode_2d(q.kidx[0], q.kidx[1], cfg.kidx, v);
    return v;
}

namespace {

template <typename T>
Var<T> run_field(const KernelFieldConfig& cfg, const Binding<T>& p, Tensor<T> input) {
    Var<T> x(std::move(input));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string name = "head.field.layer" + std::to_string(l);
        x = dense(x, p(name + ".weight"), p(name + ".bias"));
        if (l + 1 < cfg.layers) x = relu(x);
    }
    return x;
}

} // namespace

template <typename T>
Var<T> kernel_at(const KernelFieldConfig& cfg, const Binding<T>& p, Pair delta, Pair s, std::array<int, 2> kidx) {
    const auto in = field_input(cfg, normalize_inputs(delta, s, kidx, cfg.kernel));
    Tensor<T> input(Shape{1, static_cast<std::int64_t>(in.size())}, std::vector<T>(in.begin(), in.end()));
    return reshape(run_field(cfg, p, std::move(input)), Shape{cfg.channels});
}

template <typename T>
Var<T> kernel_bank(const KernelFieldConfig& cfg, const Binding<T>& p, const std::vector<Pair>& deltas, Pair s) {
    const int K = cfg.kernel;
    const std::int64_t taps = static_cast<std::int64_t>(K) * K;
    const std::int64_t U = static_cast<std::int64_t>(deltas.size());
    const std::int64_t D = cfg.input_width();
    // encodings of scale and tap index are shared by every offset
    std::vector<std::vector<double>> rows_tail(static_cast<std::size_t>(taps));
    for (int ki = 0; ki < K; ++ki)
        for (int kj = 0; kj < K; ++kj) {
            const auto q = normalize_inputs({0.0, 0.0}, s, {ki, kj}, K);
            auto& r = rows_tail[static_cast<std::size_t>(ki * K + kj)];
            append_encode_2d(q.scale[0], q.scale[1], cfg.scale, r);
            append_encode_2d(q.kidx[0], q.kidx[1], cfg.kidx, r);
        }
    Tensor<T> input(Shape{U, taps, D});
    T* dst = input.data().data();
    std::vector<double> head;
    for (std::int64_t u = 0; u < U; ++u) {
        head.clear();
        append_encode_2d(deltas[u][0], deltas[u][1], cfg.delta, head);
        for (std::int64_t t = 0; t < taps; ++t) {
            for (double v : head) *dst++ = static_cast<T>(v);
            for (double v : rows_tail[static_cast<std::size_t>(t)]) *dst++ = static_cast<T>(v);
        }
    }
    return run_field(cfg, p, std::move(input));
}

template <typename T>
Var<T> kernel_full(const KernelFieldConfig& cfg, const Binding<T>& p, Pair delta, Pair s) {
    const std::int64_t taps = static_cast<std::int64_t>(cfg.kernel) * cfg.kernel;
    return reshape(kernel_bank(cfg, p, std::vector<Pair>{delta}, s), Shape{taps, cfg.channels});
}

DecodePlan make_decode_plan(std::int64_t lr_h, std::int64_t lr_w, Pair s, std::int64_t ty0, std::int64_t tx0,
                            std::int64_t h, std::int64_t w, std::int64_t lr_y0, std::int64_t lr_x0) {
    if (h < 1 || w < 1) throw std::invalid_argument("decode: target size must be >= 1");
    if (!(s[0] > 0.0) || !(s[1] > 0.0)) throw std::invalid_argument("decode: scales must be positive");
    DecodePlan plan;
    plan.scale = s;
    plan.gather.out_h = h;
    plan.gather.out_w = w;

    std::vector<SubpixelCoord> rows(static_cast<std::size_t>(h)), cols(static_cast<std::size_t>(w));
    for (std::int64_t y = 0; y < h; ++y) {
        rows[y] = subpixel_coord(ty0 + y, s[0]);
        rows[y].source -= lr_y0;
        if (rows[y].source < 0 || rows[y].source >= lr_h) throw std::out_of_range("decode: target row outside LR patch");
    }
    for (std::int64_t x = 0; x < w; ++x) {
        cols[x] = subpixel_coord(tx0 + x, s[1]);
        cols[x].source -= lr_x0;
        if (cols[x].source < 0 || cols[x].source >= lr_w) throw std::out_of_range("decode: target column outside LR patch");
    }

    auto quantize = [](double d) { return static_cast<std::int64_t>(std::llround(d * 1e9)); };
    std::map<std::pair<std::int64_t, std::int64_t>, std::int32_t> seen;
    plan.gather.source.resize(static_cast<std::size_t>(h * w));
    plan.gather.query.resize(static_cast<std::size_t>(h * w));
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const auto key = std::make_pair(quantize(rows[y].delta), quantize(cols[x].delta));
            auto [it, inserted] = seen.try_emplace(key, static_cast<std::int32_t>(plan.deltas.size()));
            if (inserted) plan.deltas.push_back({rows[y].delta, cols[x].delta});
            const auto p = y * w + x;
            plan.gather.source[p] = rows[y].source * lr_w + cols[x].source;
            plan.gather.query[p] = it->second;
        }
    }
    return plan;
}

DecodePlan full_decode_plan(std::int64_t lr_h, std::int64_t lr_w, Pair s) {
    return make_decode_plan(lr_h, lr_w, s, 0, 0, scaled_extent(lr_h, s[0]), scaled_extent(lr_w, s[1]));
}

template <typename T>
Var<T> cuf_project(const Binding<T>& p, const Var<T>& depthwise_out) {
    Var<T> h = relu(dense(depthwise_out, p("head.dense1.weight"), p("head.dense1.bias")));
    return dense(h, p("head.dense2.weight"), p("head.dense2.bias"));
}

template <typename T>
Var<T> decode_plan(const KernelFieldConfig& cfg, const Binding<T>& p, const Var<T>& features_unfolded,
                   const DecodePlan& plan) {
    const std::int64_t taps = static_cast<std::int64_t>(cfg.kernel) * cfg.kernel;
    if (features_unfolded.value().rank() != 3 || features_unfolded.value().dim(2) != cfg.channels * taps) {
        throw ShapeError("decode: features must be [H,W," + std::to_string(cfg.channels * taps) + "], got " +
                         shape_str(features_unfolded.shape()));
    }
    Var<T> kernels = kernel_bank(cfg, p, plan.deltas, plan.scale);
    return cuf_project(p, depthwise_gather(features_unfolded, kernels, plan.gather));
}

template <typename T>
Var<T> decode_continuous(const KernelFieldConfig& cfg, const Binding<T>& p, const Var<T>& features_unfolded,
                         double s_h, double s_w) {
    if (features_unfolded.value().rank() != 3) throw ShapeError("decode_continuous: features must be rank 3");
    const auto plan = full_decode_plan(features_unfolded.value().dim(0), features_unfolded.value().dim(1), {s_h, s_w});
    return decode_plan(cfg, p, features_unfolded, plan);
}

template <typename T>
InstantiatedKernels<T> instantiate(const KernelFieldConfig& cfg, const Binding<T>& p, int s) {
    if (s < 1) throw std::invalid_argument("instantiate: scale must be an integer >= 1");
    std::vector<Pair> deltas;
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) deltas.push_back({subpixel_coord(i, s).delta, subpixel_coord(j, s).delta});
    const double sd = static_cast<double>(s);
    return InstantiatedKernels<T>{s, kernel_bank(cfg, p, deltas, {sd, sd}).value()};
}

template <typename T>
Var<T> decode_instantiated(const KernelFieldConfig& cfg, const Binding<T>& p, const InstantiatedKernels<T>& kernels,
                           const Var<T>& features_raw) {
    const int s = kernels.scale;
    const std::int64_t s2 = static_cast<std::int64_t>(s) * s;
    const std::int64_t K = cfg.kernel, taps = K * K, C = cfg.channels;
    if (kernels.weights.shape() != Shape{s2, taps, C}) {
        throw ShapeError("decode_instantiated: kernel bank " + shape_str(kernels.weights.shape()) +
                         " does not match scale/kernel/channels");
    }
    if (features_raw.value().rank() != 3 || features_raw.value().dim(2) != C) {
        throw ShapeError("decode_instantiated: features must be [H,W," + std::to_string(C) + "], got " +
                         shape_str(features_raw.shape()));
    }
    // filter c*s^2 + g applies offset g's kernel to input channel c
    Tensor<T> w(Shape{C * s2, K, K});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t g = 0; g < s2; ++g)
            for (std::int64_t t = 0; t < taps; ++t) w[(c * s2 + g) * taps + t] = kernels.weights[(g * taps + t) * C + c];
    Var<T> expanded = depthwise_conv2d(features_raw, Var<T>(std::move(w)), static_cast<int>(K / 2), static_cast<int>(s2));
    return cuf_project(p, pixel_shuffle(expanded, s));
}

#define CUFSR_INSTANTIATE_CUF(T)                                                                                     \
    template void init_cuf_head(ParameterSet<T>&, const KernelFieldConfig&, Rng&);                                   \
    template Var<T> kernel_at(const KernelFieldConfig&, const Binding<T>&, Pair, Pair, std::array<int, 2>);          \
    template Var<T> kernel_full(const KernelFieldConfig&, const Binding<T>&, Pair, Pair);                            \
    template Var<T> kernel_bank(const KernelFieldConfig&, const Binding<T>&, const std::vector<Pair>&, Pair);        \
    template Var<T> decode_plan(const KernelFieldConfig&, const Binding<T>&, const Var<T>&, const DecodePlan&);      \
    template Var<T> decode_continuous(const KernelFieldConfig&, const Binding<T>&, const Var<T>&, double, double);   \
    template InstantiatedKernels<T> instantiate(const KernelFieldConfig&, const Binding<T>&, int);                   \
    template Var<T> decode_instantiated(const KernelFieldConfig&, const Binding<T>&, const InstantiatedKernels<T>&, \
                                        const Var<T>&);                                                              \
    template Var<T> cuf_project(const Binding<T>&, const Var<T>&);

CUFSR_INSTANTIATE_CUF(float)
CUFSR_INSTANTIATE_CUF(double)

#undef CUFSR_INSTANTIATE_CUF

} // namespace cufsr
