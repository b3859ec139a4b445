#pragma once

#include <cstdint>
#include <vector>

#include "cufsr/autograd.hpp"

// Differentiable operations over HWC feature maps. Every op checks its
// operands, rejects non-finite results and, when any operand is on a tape,
// records a backward closure on that tape.

namespace cufsr {

/// Counts multiplications executed by forward ops on the current thread while
/// in scope. Scopes nest; only the innermost counter is incremented.
class MultiplyCounter {
public:
    MultiplyCounter();
    ~MultiplyCounter();
    MultiplyCounter(const MultiplyCounter&) = delete;
    MultiplyCounter& operator=(const MultiplyCounter&) = delete;

    std::int64_t count() const { return count_; }
    void reset() { count_ = 0; }

    static void add(std::int64_t n);

private:
    std::int64_t count_ = 0;
    MultiplyCounter* previous_;
};

/// Per-output-pixel routing for depthwise_gather: output pixel p reads the
/// unfolded features at flat source pixel `source[p]` and the kernel bank row
/// `query[p]`.
struct GatherPlan {
    std::int64_t out_h = 0;
    std::int64_t out_w = 0;
    std::vector<std::int64_t> source;
    std::vector<std::int32_t> query;
};

/// Cross-correlation with zero padding. weight is [Cout, Cin, K, K], K odd and
/// padding == (K - 1) / 2.
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, int padding);

/// Per-channel K x K filtering. weight is [C * multiplier, K, K]; output
/// channel o reads input channel o / multiplier.
template <typename T>
Var<T> depthwise_conv2d(const Var<T>& input, const Var<T>& weight, int padding, int multiplier = 1);

/// Affine map along the last axis: weight [Cin, Cout], bias [Cout].
template <typename T>
Var<T> dense(const Var<T>& input, const Var<T>& weight, const Var<T>& bias);

/// [H,W,C] -> [H,W,C*k*k], tap index c*k*k + ki*k + kj, zero outside.
template <typename T>
Var<T> unfold(const Var<T>& input, int k);

/// Nearest-neighbour resampling to floor(s_h*H) x floor(s_w*W); output (y,x)
/// reads input (floor(y/s_h), floor(x/s_w)).
template <typename T>
Var<T> nearest_sample(const Var<T>& input, double s_h, double s_w);

/// out(y*s+i, x*s+j, c) = in(y, x, c*s*s + i*s + j).
template <typename T>
Var<T> pixel_shuffle(const Var<T>& input, int s);

template <typename T>
Var<T> pixel_unshuffle(const Var<T>& input, int s);

/// out(p, c) = sum_t kernels(query[p], t, c) * features(source[p], c*K2 + t)
/// for features [H,W,C*K2] and kernels [U,K2,C].
template <typename T>
Var<T> depthwise_gather(const Var<T>& features, const Var<T>& kernels, const GatherPlan& plan);

/// Spatial window [y0, y0+h) x [x0, x0+w) of an HWC map.
template <typename T>
Var<T> slice_hw(const Var<T>& input, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w);

template <typename T>
Var<T> reshape(const Var<T>& input, Shape shape);

template <typename T>
Var<T> relu(const Var<T>& input);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& a, T factor);

template <typename T>
Var<T> sum(const Var<T>& a);

/// Mean absolute difference over all elements, as a scalar.
template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Var<T>& target);

} // namespace cufsr
