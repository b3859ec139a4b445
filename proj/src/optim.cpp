#include "cufsr/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cufsr {

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const ParameterSet<T>& params) {
    AdamState<T> s;
    for (const auto& p : params) {
        s.m.emplace_back(p.value.shape());
        s.v.emplace_back(p.value.shape());
    }
    return s;
}

template <typename T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state, double lr, const AdamConfig& cfg) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam state does not match parameter set");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].shape() != params[i].value.shape() || state.v[i].shape() != params[i].value.shape()) {
            throw std::invalid_argument("adam state shape mismatch for " + params[i].name);
        }
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].value.data();
        auto g = params[i].grad.data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = static_cast<double>(g[k]);
            const double mk = cfg.beta1 * static_cast<double>(m[k]) + (1.0 - cfg.beta1) * gk;
            const double vk = cfg.beta2 * static_cast<double>(v[k]) + (1.0 - cfg.beta2) * gk * gk;
            m[k] = static_cast<T>(mk);
            v[k] = static_cast<T>(vk);
            const double update = lr * (mk / c1) / (std::sqrt(vk / c2) + cfg.eps);
            w[k] = static_cast<T>(static_cast<double>(w[k]) - update);
        }
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(ParameterSet<float>&, AdamState<float>&, double, const AdamConfig&);
template void adam_step(ParameterSet<double>&, AdamState<double>&, double, const AdamConfig&);

} // namespace cufsr
