#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cufsr/imaging.hpp"
#include "cufsr/model.hpp"
#include "cufsr/optim.hpp"

namespace cufsr {

struct TrainConfig {
    int epochs = 200;
    int batch = 16;
    int crop = 12;  // LR patch size; HR patches have the same size
    double lr_initial = 1e-4;
    std::vector<int> milestones{100, 160, 180, 190};
    AdamConfig adam;
    double scale_min = 1.0;
    double scale_max = 4.0;
    std::uint64_t seed = 0;
    int crops_per_image_per_epoch = 20;
    bool augment = true;       // random dihedral transform per crop
    int eval_every = 1;        // held-out PSNR every N epochs (and on the last)
    std::vector<double> eval_scales{2.0, 3.0, 4.0};

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// lr_initial * 2^-(number of milestones <= epoch). Epoch e (1-based) trains
/// with learning_rate_after(cfg, e - 1).
double learning_rate_after(const TrainConfig& cfg, int epoch);

/// HR images held in memory.
struct Dataset {
    std::vector<std::string> names;
    std::vector<Image> images;

    /// Every *.png in `dir`, sorted by file name.
    static Dataset from_directory(const std::filesystem::path& dir);
    std::size_t size() const { return images.size(); }
};

/// One training element: LR/HR patch pair plus the target coordinates of the
/// HR patch.
using TrainSample = CropPair;

/// One sample per listed image: scale drawn uniformly from
/// [scale_min, scale_max], optional random dihedral augmentation, then a
/// random crop pair.
std::vector<TrainSample> sample_batch(const Dataset& data, std::span<const std::size_t> image_indices,
                                      const TrainConfig& cfg, Rng& rng);

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_l1 = 0.0;
    std::map<double, double> eval_psnr;  // scale -> mean held-out PSNR (RGB)
};

struct TrainResult {
    SrModel<float> model;
    AdamState<float> adam;
    std::vector<EpochMetrics> log;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs the optimization from `init`. Epochs visit every image
/// crops_per_image_per_epoch times in a seeded shuffled order.
TrainResult train(const Dataset& train_set, const Dataset* eval_set, SrModel<float> init, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Mean L1 of one batch and, if requested, its accumulated gradients in
/// model.params. Exposed for the trainer's tests.
double batch_loss_and_grad(SrModel<float>& model, const std::vector<TrainSample>& batch, bool accumulate_grad);

/// Mean held-out PSNR (RGB, full frame) per scale; LR inputs synthesized by
/// bicubic downscaling.
std::map<double, double> held_out_psnr(const SrModel<float>& model, const Dataset& data, std::span<const double> scales);

/// epoch,lr,train_l1,eval_psnr_x2,eval_psnr_x3,eval_psnr_x4
std::string metrics_csv(const std::vector<EpochMetrics>& log);

/// Formats a PSNR for CSV output: "inf" for +inf, empty for NaN.
std::string format_psnr(double db);

/// Procedural texture (smooth gradient, oriented stripes, sharp shapes),
/// supersampled so that it carries detail at every scale.
Image synthetic_texture(std::int64_t size, Rng& rng);

Dataset synthetic_dataset(std::size_t count, std::int64_t size, std::uint64_t seed);

} // namespace cufsr
