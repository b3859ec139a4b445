#include "cufsr/baseline.hpp"

#include <stdexcept>

#include "cufsr/encoder.hpp"
#include "cufsr/ops.hpp"

namespace cufsr {

void SubPixelConfig::validate() const {
    if (channels < 1 || n_out < 1) throw std::invalid_argument("subpixel: channel counts must be >= 1");
    if (scale < 1) throw std::invalid_argument("subpixel: scale must be an integer >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("subpixel: kernel must be odd");
}

std::int64_t subpixel_param_count(std::int64_t channels, std::int64_t scale, std::int64_t kernel, std::int64_t n_out,
                                  bool include_projection) {
    const std::int64_t s2 = scale * scale;
    std::int64_t n = channels * kernel * kernel * s2 * n_out + s2 * n_out;
    if (include_projection) n += n_out * 3 + 3;
    return n;
}

template <typename T>
void init_subpixel_head(ParameterSet<T>& params, const SubPixelConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::int64_t s2 = static_cast<std::int64_t>(cfg.scale) * cfg.scale;
    const std::int64_t fan_in = static_cast<std::int64_t>(cfg.channels) * cfg.kernel * cfg.kernel;
    params.add("head.expansion.weight",
               uniform_init<T>(Shape{s2 * cfg.n_out, cfg.channels, cfg.kernel, cfg.kernel}, fan_in, rng));
    params.add("head.expansion.bias", uniform_init<T>(Shape{s2 * cfg.n_out}, fan_in, rng));
    params.add("head.projection.weight", uniform_init<T>(Shape{cfg.n_out, 3}, cfg.n_out, rng));
    params.add("head.projection.bias", uniform_init<T>(Shape{3}, cfg.n_out, rng));
}

template <typename T>
Var<T> subpixel_forward(const SubPixelConfig& cfg, const Binding<T>& p, const Var<T>& features) {
    if (features.value().rank() != 3 || features.value().dim(2) != cfg.channels) {
        throw ShapeError("subpixel_forward: features must be [H,W," + std::to_string(cfg.channels) + "], got " +
                         shape_str(features.shape()));
    }
    Var<T> expanded = conv2d(features, p("head.expansion.weight"), p("head.expansion.bias"), cfg.kernel / 2);
    Var<T> shuffled = pixel_shuffle(expanded, cfg.scale);
    return dense(shuffled, p("head.projection.weight"), p("head.projection.bias"));
}

template void init_subpixel_head(ParameterSet<float>&, const SubPixelConfig&, Rng&);
template void init_subpixel_head(ParameterSet<double>&, const SubPixelConfig&, Rng&);
template Var<float> subpixel_forward(const SubPixelConfig&, const Binding<float>&, const Var<float>&);
template Var<double> subpixel_forward(const SubPixelConfig&, const Binding<double>&, const Var<double>&);

} // namespace cufsr
