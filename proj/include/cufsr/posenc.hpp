#pragma once

#include <string>
#include <vector>

namespace cufsr {

enum class EncodingKind { Dct, Fourier };

std::string to_string(EncodingKind kind);
EncodingKind encoding_kind_from_string(const std::string& s);

/// Positional encoding of a [0,1] quantity with N frequencies evenly spaced
/// over [0, f_max].
struct EncodingConfig {
    int n_per_axis = 5;
    double f_max = 2.0;
    EncodingKind kind = EncodingKind::Dct;

    /// Features per scalar: N for DCT, 2N for Fourier.
    int width_1d() const;
    /// Features per 2D input: N^2 for DCT, 2N^2 for Fourier.
    int width_2d() const;

    void validate() const;
    bool operator==(const EncodingConfig&) const = default;
};

std::vector<double> frequencies(const EncodingConfig& cfg);

/// DCT: cos((2z+1) f_n pi / 2) per frequency. Fourier: (cos, sin) of the same
/// phase, interleaved.
std::vector<double> encode_scalar(double z, const EncodingConfig& cfg);

/// Separable 2D basis, i (x-axis frequency) major, j minor. DCT entries are
/// cos(a_i) cos(b_j); Fourier entries are (cos, sin) of a_i + b_j, the real
/// and imaginary parts of the product of the two complex exponentials.
std::vector<double> encode_2d(double x, double y, const EncodingConfig& cfg);

/// Appends encode_2d(x, y) to `out` without allocating a temporary.
void append_encode_2d(double x, double y, const EncodingConfig& cfg, std::vector<double>& out);

} // namespace cufsr
