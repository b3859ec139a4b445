#pragma once

#include <cstdint>
#include <string>

#include "cufsr/baseline.hpp"
#include "cufsr/cuf.hpp"
#include "cufsr/encoder.hpp"
#include "cufsr/imaging.hpp"

namespace cufsr {

enum class HeadKind { Cuf, SubPixel };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& s);

/// Encoder plus one upsampling head. Channel counts of the encoder and the
/// head are kept equal.
struct ModelConfig {
    EncoderConfig encoder;
    HeadKind head = HeadKind::Cuf;
    KernelFieldConfig cuf;
    SubPixelConfig subpixel;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct SrModel {
    ModelConfig config;
    ParameterSet<T> params;

    /// Deterministic initialization: same config and seed give bit-identical
    /// parameters.
    static SrModel create(const ModelConfig& config, std::uint64_t seed);

    template <typename U>
    SrModel<U> cast() const {
        return SrModel<U>{config, params.template cast<U>()};
    }
};

/// Predicted HR patch for a training pair: the crop x crop target window at
/// (hr_y, hr_x) decoded from the LR patch at (lr_y, lr_x).
template <typename T>
Var<T> forward_patch(const ModelConfig& cfg, const Binding<T>& p, const Var<T>& lr_patch, const CropPair& where);

/// Full-image inference through the continuous decoder (CUF) or the fixed
/// scale head (sub-pixel; s must equal its scale).
Image upscale(const SrModel<float>& model, const Image& lr, double s_h, double s_w);

/// Inference through a pre-instantiated kernel bank (integer scale).
Image upscale_instantiated(const SrModel<float>& model, const InstantiatedKernels<float>& kernels, const Image& lr);

} // namespace cufsr
