#pragma once

#include <cstdint>
#include <vector>

#include "cufsr/autograd.hpp"

namespace cufsr {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool operator==(const AdamConfig&) const = default;
};

/// First and second moments per parameter, in ParameterSet order.
template <typename T>
struct AdamState {
    std::int64_t step = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;

    static AdamState zeros_like(const ParameterSet<T>& params);
};

/// One bias-corrected Adam update using each Parameter::grad.
template <typename T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state, double lr, const AdamConfig& cfg);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

} // namespace cufsr
