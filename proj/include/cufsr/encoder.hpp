#pragma once

#include <string>

#include "cufsr/autograd.hpp"
#include "cufsr/binding.hpp"
#include "cufsr/rng.hpp"

namespace cufsr {

/// Residual convolutional feature extractor: head conv 3->C, `blocks`
/// conv-ReLU-conv residual blocks, tail conv with a global skip from the head.
struct EncoderConfig {
    int channels = 64;
    int blocks = 4;
    int kernel = 3;

    void validate() const;
    std::int64_t param_count() const;
    bool operator==(const EncoderConfig&) const = default;
};

/// Registers encoder parameters (prefix "encoder.") drawn from
/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void init_encoder(ParameterSet<T>& params, const EncoderConfig& cfg, Rng& rng);

/// [H,W,3] -> [H,W,C].
template <typename T>
Var<T> encode(const EncoderConfig& cfg, const Binding<T>& p, const Var<T>& image);

/// encode followed by unfold(K): [H,W,3] -> [H,W,C*K*K]. Nearest-neighbour
/// lifting to the target grid is left to the decoder's source lookup.
template <typename T>
Var<T> featurize(const EncoderConfig& cfg, const Binding<T>& p, const Var<T>& image, int kernel);

/// Uniform(-a, a) tensor with a = 1/sqrt(fan_in), in row-major draw order.
template <typename T>
Tensor<T> uniform_init(Shape shape, std::int64_t fan_in, Rng& rng);

} // namespace cufsr
