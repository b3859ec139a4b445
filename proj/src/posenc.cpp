#include "cufsr/posenc.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cufsr {

std::string to_string(EncodingKind kind) { return kind == EncodingKind::Dct ? "dct" : "fourier"; }

EncodingKind encoding_kind_from_string(const std::string& s) {
    if (s == "dct") return EncodingKind::Dct;
    if (s == "fourier") return EncodingKind::Fourier;
    throw std::invalid_argument("unknown encoding kind '" + s + "' (expected dct or fourier)");
}

int EncodingConfig::width_1d() const { return kind == EncodingKind::Dct ? n_per_axis : 2 * n_per_axis; }

int EncodingConfig::width_2d() const {
    const int n2 = n_per_axis * n_per_axis;
    return kind == EncodingKind::Dct ? n2 : 2 * n2;
}

void EncodingConfig::validate() const {
    if (n_per_axis < 1) throw std::invalid_argument("encoding: n_per_axis must be >= 1");
    if (!(f_max >= 0.0) || !std::isfinite(f_max)) throw std::invalid_argument("encoding: f_max must be >= 0");
}

std::vector<double> frequencies(const EncodingConfig& cfg) {
    cfg.validate();
    std::vector<double> f(static_cast<std::size_t>(cfg.n_per_axis), 0.0);
    if (cfg.n_per_axis > 1) {
        for (int n = 0; n < cfg.n_per_axis; ++n) f[n] = cfg.f_max * n / (cfg.n_per_axis - 1);
    }
    return f;
}

namespace {

std::vector<double> phases(double z, const std::vector<double>& freqs) {
    std::vector<double> a(freqs.size());
    for (std::size_t n = 0; n < freqs.size(); ++n) a[n] = (2.0 * z + 1.0) * freqs[n] * std::numbers::pi / 2.0;
    return a;
}

} // namespace

std::vector<double> encode_scalar(double z, const EncodingConfig& cfg) {
    const auto a = phases(z, frequencies(cfg));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(cfg.width_1d()));
    for (double p : a) {
        out.push_back(std::cos(p));
        if (cfg.kind == EncodingKind::Fourier) out.push_back(std::sin(p));
    }
    return out;
}

void append_encode_2d(double x, double y, const EncodingConfig& cfg, std::vector<double>& out) {
    const auto freqs = frequencies(cfg);
    const auto a = phases(x, freqs);
    const auto b = phases(y, freqs);
    for (double ai : a) {
        for (double bj : b) {
            if (cfg.kind == EncodingKind::Dct) {
                out.push_back(std::cos(ai) * std::cos(bj));
            } else {
                out.push_back(std::cos(ai + bj));
                out.push_back(std::sin(ai + bj));
            }
        }
    }
}

std::vector<double> encode_2d(double x, double y, const EncodingConfig& cfg) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(cfg.width_2d()));
    append_encode_2d(x, y, cfg, out);
    return out;
}

} // namespace cufsr
