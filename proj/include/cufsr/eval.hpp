#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cufsr/model.hpp"
#include "cufsr/train.hpp"

namespace cufsr {

/// Any LR -> SR mapping at a given (isotropic) scale.
using Upscaler = std::function<Image(const Image& lr, double s)>;

enum class ColorSpace { Rgb, Y };

ColorSpace color_space_from_string(const std::string& s);

struct PsnrRow {
    std::string image;
    double scale = 0.0;
    double psnr = 0.0;
};

struct PsnrTable {
    std::vector<PsnrRow> rows;

    double mean(double scale) const;
    /// image,scale,psnr with a "mean" row per scale.
    std::string csv() const;
};

/// Per-image PSNR of `model` against each HR image. LR inputs come from
/// `lr_images` when given (single scale only), otherwise from bicubic
/// downscaling. SR output is clamped to [0,1]; the HR reference is cropped
/// to the SR size.
PsnrTable psnr_eval(const Upscaler& model, const Dataset& hr, const Dataset* lr_images, const std::vector<double>& scales,
                    ColorSpace space, int border = 0);

/// Mean over the 8 dihedral transforms of the inverse-transformed outputs.
Image geo_ensemble(const Upscaler& model, const Image& lr, double s);

Upscaler bicubic_upscaler();
Upscaler model_upscaler(const SrModel<float>& model);

// --- multiply / memory accounting -----------------------------------------

enum class CostHead { CufInstantiated, CufContinuous, SubPixel };

std::string to_string(CostHead head);
CostHead cost_head_from_string(const std::string& s);

struct CostQuery {
    CostHead head = CostHead::CufInstantiated;
    std::int64_t height = 256;  // LR input size
    std::int64_t width = 256;
    double scale = 4.0;
    int channels = 64;
    int kernel = 3;
    int n_out = 64;  // sub-pixel post-shuffle channels
    int hidden = 32;
    int field_layers = 4;
    int field_input = 59;
    std::optional<int> encoder_blocks;  // include the encoder when set
};

struct CostStage {
    std::string name;
    std::int64_t mults = 0;
    std::int64_t peak_elems = 0;  // live intermediate elements while the stage runs
};

/// Multiplications (adds are not counted) per stage of one forward pass.
struct CostReport {
    CostQuery query;
    std::int64_t out_height = 0;
    std::int64_t out_width = 0;
    std::int64_t unique_offsets = 0;  // distinct sub-pixel offsets queried
    std::vector<CostStage> stages;

    std::int64_t total_mults() const;
    std::int64_t peak_elems() const;
    std::int64_t stage_mults(const std::string& name) const;
    std::int64_t out_pixels() const { return out_height * out_width; }
    /// stage,mults,peak_elems rows plus a total row, preceded by comment lines
    /// echoing the configuration.
    std::string csv() const;
};

/// Closed-form counts.
CostReport count_mults(const CostQuery& q);

/// The same stages measured by running the real operators on random data
/// under a MultiplyCounter. `whole_pass` receives the counter value of the
/// unsplit forward pass.
CostReport instrumented_mults(const CostQuery& q, std::uint64_t seed, std::int64_t* whole_pass = nullptr);

// --- filter redundancy ----------------------------------------------------

/// Eigenvalues of a symmetric n x n matrix (row-major) by cyclic Jacobi
/// rotations, sorted descending.
std::vector<double> symmetric_eigenvalues(std::vector<double> a, int n);

struct EigenGroup {
    std::vector<double> eigenvalues;  // descending
    std::vector<double> cumvar;       // normalized cumulative sums
    double total_variance = 0.0;
};

/// Sample covariance spectrum of the rows of an n_rows x n_cols matrix,
/// computed from the n_rows x n_rows Gram matrix of the centred rows.
EigenGroup row_pca(const std::vector<double>& rows, int n_rows, int n_cols);

struct EigenReport {
    std::string mode;  // "subpixel" or "cuf"
    int scale = 0;
    std::vector<EigenGroup> groups;

    /// group,index,eigenvalue,cumvar
    std::string csv() const;
};

/// Sub-pixel: per output feature group, the s^2 expansion filters of size
/// C*K*K. weight is [s^2 * N_out, C, K, K] in pixel-shuffle channel order.
EigenReport filter_pca_subpixel(const Tensor<float>& expansion_weight, int s);

/// CUF: per channel, the s^2 instantiated K*K kernels.
EigenReport filter_pca_cuf(const InstantiatedKernels<float>& kernels);

/// Dispatches on the model's head kind.
EigenReport filter_pca(const SrModel<float>& model, int s);

} // namespace cufsr
