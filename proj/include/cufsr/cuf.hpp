#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cufsr/autograd.hpp"
#include "cufsr/binding.hpp"
#include "cufsr/ops.hpp"
#include "cufsr/posenc.hpp"
#include "cufsr/rng.hpp"

namespace cufsr {

using Pair = std::array<double, 2>;  // (row, column) / (h, w) components

/// Hypernetwork producing depthwise kernel taps from encoded (offset, scale,
/// tap index), followed in CufHead by two dense layers C -> C -> 3.
struct KernelFieldConfig {
    EncodingConfig delta{5, 2.0, EncodingKind::Dct};
    EncodingConfig scale{5, 2.0, EncodingKind::Dct};
    EncodingConfig kidx{3, 1.0, EncodingKind::Dct};
    int hidden = 32;
    int layers = 4;  // affine layers; ReLU after all but the last
    int channels = 64;
    int kernel = 3;

    int input_width() const;
    std::int64_t param_count() const;
    void validate() const;
    bool operator==(const KernelFieldConfig&) const = default;
};

/// Parameter count of the two dense layers C -> C -> 3.
std::int64_t cuf_dense_param_count(int channels);

/// Registers "head.field.layer{i}.*", "head.dense1.*" and "head.dense2.*".
template <typename T>
void init_cuf_head(ParameterSet<T>& params, const KernelFieldConfig& cfg, Rng& rng);

struct NormalizedQuery {
    Pair delta;
    Pair scale;
    Pair kidx;
};

/// delta unchanged, scale -> 1/s, tap index -> k/(K-1) (0 when K == 1).
NormalizedQuery normalize_inputs(Pair delta, Pair scale, std::array<int, 2> kidx, int kernel);

/// Concatenated encodings fed to the first hypernetwork layer.
std::vector<double> field_input(const KernelFieldConfig& cfg, const NormalizedQuery& q);

/// Depthwise weights [C] for tap `kidx` at offset `delta` and scale `s`.
template <typename T>
Var<T> kernel_at(const KernelFieldConfig& cfg, const Binding<T>& p, Pair delta, Pair s, std::array<int, 2> kidx);

/// All K*K taps, row ki*K + kj: [K*K, C].
template <typename T>
Var<T> kernel_full(const KernelFieldConfig& cfg, const Binding<T>& p, Pair delta, Pair s);

/// Batched kernel_full over offsets: [U, K*K, C].
template <typename T>
Var<T> kernel_bank(const KernelFieldConfig& cfg, const Binding<T>& p, const std::vector<Pair>& deltas, Pair s);

/// Target pixels to decode, their LR source pixels and the distinct sub-pixel
/// offsets they use (memoized at a 1e-9 quantum).
struct DecodePlan {
    Pair scale{1.0, 1.0};
    GatherPlan gather;
    std::vector<Pair> deltas;
};

/// Plan for the target window [ty0, ty0+h) x [tx0, tx0+w) of the target grid
/// at scale (s_h, s_w), reading an LR patch of size lr_h x lr_w whose top-left
/// sits at (lr_y0, lr_x0) of the LR grid.
DecodePlan make_decode_plan(std::int64_t lr_h, std::int64_t lr_w, Pair s, std::int64_t ty0, std::int64_t tx0,
                            std::int64_t h, std::int64_t w, std::int64_t lr_y0 = 0, std::int64_t lr_x0 = 0);

/// Whole target grid floor(s_h*H) x floor(s_w*W).
DecodePlan full_decode_plan(std::int64_t lr_h, std::int64_t lr_w, Pair s);

/// Decodes the plan's target pixels from unfolded features [H,W,C*K*K] to RGB.
template <typename T>
Var<T> decode_plan(const KernelFieldConfig& cfg, const Binding<T>& p, const Var<T>& features_unfolded,
                   const DecodePlan& plan);

template <typename T>
Var<T> decode_continuous(const KernelFieldConfig& cfg, const Binding<T>& p, const Var<T>& features_unfolded,
                         double s_h, double s_w);

/// Discrete depthwise kernel bank for integer scale s: weights [s*s, K*K, C],
/// row i*s + j holding the kernel for offset (i/s, j/s).
template <typename T>
struct InstantiatedKernels {
    int scale = 1;
    Tensor<T> weights;
};

template <typename T>
InstantiatedKernels<T> instantiate(const KernelFieldConfig& cfg, const Binding<T>& p, int s);

/// Grouped depthwise convolution on the LR grid, pixel shuffle, then the two
/// dense layers. features_raw is the encoder output [H,W,C], not unfolded.
template <typename T>
Var<T> decode_instantiated(const KernelFieldConfig& cfg, const Binding<T>& p, const InstantiatedKernels<T>& kernels,
                           const Var<T>& features_raw);

/// Shared tail of both decode paths: dense1 -> ReLU -> dense2.
template <typename T>
Var<T> cuf_project(const Binding<T>& p, const Var<T>& depthwise_out);

} // namespace cufsr
