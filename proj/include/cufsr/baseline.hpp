#pragma once

#include <cstdint>

#include "cufsr/autograd.hpp"
#include "cufsr/binding.hpp"
#include "cufsr/rng.hpp"

namespace cufsr {

/// Fixed-scale sub-pixel convolution head: expansion conv C -> s^2 * N_out,
/// pixel shuffle, pointwise projection N_out -> 3.
struct SubPixelConfig {
    int channels = 64;
    int scale = 2;
    int kernel = 3;
    int n_out = 64;

    void validate() const;
    bool operator==(const SubPixelConfig&) const = default;
};

/// C*K^2*s^2*N_out + s^2*N_out, plus N_out*3 + 3 when the RGB projection is
/// included.
std::int64_t subpixel_param_count(std::int64_t channels, std::int64_t scale, std::int64_t kernel, std::int64_t n_out,
                                  bool include_projection = false);

/// Registers "head.expansion.*" and "head.projection.*".
template <typename T>
void init_subpixel_head(ParameterSet<T>& params, const SubPixelConfig& cfg, Rng& rng);

/// [H,W,C] -> [sH,sW,3].
template <typename T>
Var<T> subpixel_forward(const SubPixelConfig& cfg, const Binding<T>& p, const Var<T>& features);

} // namespace cufsr
