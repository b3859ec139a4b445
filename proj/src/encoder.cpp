#include "cufsr/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "cufsr/ops.hpp"

namespace cufsr {

void EncoderConfig::validate() const {
    if (channels < 1) throw std::invalid_argument("encoder: channels must be >= 1");
    if (blocks < 0) throw std::invalid_argument("encoder: blocks must be >= 0");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("encoder: kernel must be odd");
}

std::int64_t EncoderConfig::param_count() const {
    const std::int64_t C = channels, K2 = static_cast<std::int64_t>(kernel) * kernel;
    const std::int64_t conv = C * C * K2 + C;
    return (C * 3 * K2 + C) + 2 * blocks * conv + conv;
}

template <typename T>
Tensor<T> uniform_init(Shape shape, std::int64_t fan_in, Rng& rng) {
    Tensor<T> t(std::move(shape));
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-a, a));
    return t;
}

namespace {

template <typename T>
void add_conv(ParameterSet<T>& params, const std::string& name, std::int64_t cin, std::int64_t cout, int k,
              Rng& rng) {
    const std::int64_t fan_in = cin * k * k;
    params.add(name + ".weight", uniform_init<T>(Shape{cout, cin, k, k}, fan_in, rng));
    params.add(name + ".bias", uniform_init<T>(Shape{cout}, fan_in, rng));
}

template <typename T>
Var<T> conv(const Binding<T>& p, const std::string& name, const Var<T>& x, int k) {
    return conv2d(x, p(name + ".weight"), p(name + ".bias"), (k - 1) / 2);
}

} // namespace

template <typename T>
void init_encoder(ParameterSet<T>& params, const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    add_conv(params, "encoder.head", 3, cfg.channels, cfg.kernel, rng);
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string blk = "encoder.block" + std::to_string(b);
        add_conv(params, blk + ".conv1", cfg.channels, cfg.channels, cfg.kernel, rng);
        add_conv(params, blk + ".conv2", cfg.channels, cfg.channels, cfg.kernel, rng);
    }
    add_conv(params, "encoder.tail", cfg.channels, cfg.channels, cfg.kernel, rng);
}

template <typename T>
Var<T> encode(const EncoderConfig& cfg, const Binding<T>& p, const Var<T>& image) {
    if (image.value().rank() != 3 || image.value().dim(2) != 3) {
        throw ShapeError("encode: expected [H,W,3] image, got " + shape_str(image.shape()));
    }
    const int k = cfg.kernel;
    Var<T> head = conv(p, "encoder.head", image, k);
    Var<T> x = head;
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string blk = "encoder.block" + std::to_string(b);
        Var<T> h = relu(conv(p, blk + ".conv1", x, k));
        x = add(x, conv(p, blk + ".conv2", h, k));
    }
    return add(conv(p, "encoder.tail", x, k), head);
}

template <typename T>
Var<T> featurize(const EncoderConfig& cfg, const Binding<T>& p, const Var<T>& image, int kernel) {
    return unfold(encode(cfg, p, image), kernel);
}

template Tensor<float> uniform_init(Shape, std::int64_t, Rng&);
template Tensor<double> uniform_init(Shape, std::int64_t, Rng&);
template void init_encoder(ParameterSet<float>&, const EncoderConfig&, Rng&);
template void init_encoder(ParameterSet<double>&, const EncoderConfig&, Rng&);
template Var<float> encode(const EncoderConfig&, const Binding<float>&, const Var<float>&);
template Var<double> encode(const EncoderConfig&, const Binding<double>&, const Var<double>&);
template Var<float> featurize(const EncoderConfig&, const Binding<float>&, const Var<float>&, int);
template Var<double> featurize(const EncoderConfig&, const Binding<double>&, const Var<double>&, int);

} // namespace cufsr
