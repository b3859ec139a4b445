#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cufsr/autograd.hpp"
#include "cufsr/ops.hpp"
#include "cufsr/rng.hpp"

namespace cufsr::testing {

template <typename T = float>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) return INFINITY;
    double m = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

/// Worst relative error between reverse-mode gradients and central
/// differences for a scalar function of several double tensors.
inline double gradient_error(const std::function<Var<double>(const std::vector<Var<double>>&)>& fn,
                             std::vector<Tensor<double>> inputs, double h = 1e-6) {
    ParameterSet<double> params;
    for (std::size_t i = 0; i < inputs.size(); ++i) params.add("x" + std::to_string(i), inputs[i]);
    {
        Tape<double> tape;
        auto vars = tape.bind_all(params);
        backward(fn(vars), tape, params);
    }
    auto eval = [&]() {
        std::vector<Var<double>> vars;
        for (const auto& p : params) vars.emplace_back(p.value);
        return fn(vars).value().item();
    };
    double worst = 0.0;
    for (auto& p : params) {
        for (std::int64_t i = 0; i < p.value.numel(); ++i) {
            const double v = p.value[i];
            p.value[i] = v + h;
            const double up = eval();
            p.value[i] = v - h;
            const double dn = eval();
            p.value[i] = v;
            const double fd = (up - dn) / (2 * h);
            const double g = p.grad[i];
            const double denom = std::max({std::abs(fd), std::abs(g), 1e-6});
            worst = std::max(worst, std::abs(fd - g) / denom);
        }
    }
    return worst;
}

/// Weighted sum with fixed pseudo-random weights: a smooth scalar probe.
inline Var<double> probe(const Var<double>& x, std::uint64_t seed = 7) {
    Rng rng(seed);
    Tensor<double> w(x.shape());
    for (auto& v : w.data()) v = rng.uniform(-1.0, 1.0);
    return sum(mul(x, Var<double>(std::move(w))));
}

} // namespace cufsr::testing
