#include "cufsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cufsr/ops.hpp"

namespace cufsr {

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    if (batch < 1) throw std::invalid_argument("train: batch must be >= 1");
    if (crop < 1) throw std::invalid_argument("train: crop must be >= 1");
    if (!(lr_initial >= 0.0)) throw std::invalid_argument("train: lr_initial must be >= 0");
    for (std::size_t i = 1; i < milestones.size(); ++i)
        if (milestones[i] <= milestones[i - 1]) throw std::invalid_argument("train: milestones must be strictly increasing");
    if (!(scale_min >= 1.0)) throw std::invalid_argument("train: scale_min must be >= 1");
    if (!(scale_max >= scale_min)) throw std::invalid_argument("train: scale_max must be >= scale_min");
    if (crops_per_image_per_epoch < 1) throw std::invalid_argument("train: crops_per_image_per_epoch must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");
    for (double s : eval_scales)
        if (!(s >= 1.0)) throw std::invalid_argument("train: eval scales must be >= 1");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0)) {
        throw std::invalid_argument("train: invalid Adam hyper-parameters");
    }
}

double learning_rate_after(const TrainConfig& cfg, int epoch) {
    const auto halvings = std::count_if(cfg.milestones.begin(), cfg.milestones.end(), [&](int m) { return m <= epoch; });
    return std::ldexp(cfg.lr_initial, -static_cast<int>(halvings));
}

Dataset Dataset::from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("dataset directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::invalid_argument("no PNG images in " + dir.string());
    Dataset d;
    for (const auto& f : files) {
        d.names.push_back(f.filename().string());
        d.images.push_back(load_png(f));
    }
    return d;
}

std::vector<TrainSample> sample_batch(const Dataset& data, std::span<const std::size_t> image_indices,
                                      const TrainConfig& cfg, Rng& rng) {
    std::vector<TrainSample> batch;
    batch.reserve(image_indices.size());
    for (auto idx : image_indices) {
        if (idx >= data.size()) throw std::out_of_range("sample_batch: image index out of range");
        const double s = cfg.scale_max > cfg.scale_min ? rng.uniform(cfg.scale_min, cfg.scale_max) : cfg.scale_min;
        const int t = cfg.augment ? static_cast<int>(rng.uniform_int(0, 7)) : 0;
        const Image hr = t == 0 ? data.images[idx] : apply_dihedral(data.images[idx], t);
        batch.push_back(random_crop_pair(hr, s, cfg.crop, rng));
    }
    return batch;
}

double batch_loss_and_grad(SrModel<float>& model, const std::vector<TrainSample>& batch, bool accumulate_grad) {
    double total = 0.0;
    const float weight = 1.0f / static_cast<float>(batch.size());
    for (const auto& sample : batch) {
        Tape<float> tape;
        const auto p = Binding<float>::on_tape(tape, model.params);
        Var<float> pred = forward_patch(model.config, p, Var<float>(sample.lr), sample);
        Var<float> loss = l1_loss(pred, Var<float>(sample.hr));
        total += static_cast<double>(loss.value().item());
        if (accumulate_grad) backward(scale(loss, weight), tape, model.params);
    }
    return total / static_cast<double>(batch.size());
}

std::map<double, double> held_out_psnr(const SrModel<float>& model, const Dataset& data, std::span<const double> scales) {
    std::map<double, double> out;
    for (double s : scales) {
        if (model.config.head == HeadKind::SubPixel && s != static_cast<double>(model.config.subpixel.scale)) {
            out[s] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double acc = 0.0;
        for (const auto& hr : data.images) {
            const Image lr = bicubic_resize(hr, 1.0 / s, 1.0 / s);
            Image sr = upscale(model, lr, s, s);
            for (auto& v : sr.data()) v = std::clamp(v, 0.0f, 1.0f);
            acc += psnr(sr, crop(hr, 0, 0, sr.dim(0), sr.dim(1)));
        }
        out[s] = acc / static_cast<double>(data.size());
    }
    return out;
}

TrainResult train(const Dataset& train_set, const Dataset* eval_set, SrModel<float> init, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (init.config.head == HeadKind::SubPixel) {
        const double s = init.config.subpixel.scale;
        if (cfg.scale_min != s || cfg.scale_max != s) {
            throw std::invalid_argument("train: sub-pixel head needs scale_min == scale_max == its scale");
        }
    }
    TrainResult result{std::move(init), {}, {}};
    auto& model = result.model;
    result.adam = AdamState<float>::zeros_like(model.params);
    const Rng master(cfg.seed);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng = master.fork(static_cast<std::uint64_t>(epoch));
        std::vector<std::size_t> order;
        for (int r = 0; r < cfg.crops_per_image_per_epoch; ++r)
            for (std::size_t i = 0; i < train_set.size(); ++i) order.push_back(i);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.lr = learning_rate_after(cfg, epoch - 1);
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), order.size() - start);
            const auto batch = sample_batch(train_set, std::span(order).subspan(start, n), cfg, rng);
            model.params.zero_grad();
            double loss = 0.0;
            try {
                loss = batch_loss_and_grad(model, batch, true);
            } catch (const NumericError& e) {
                throw NumericError("non-finite value at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(steps + 1) + ": " + e.what());
            }
            if (!std::isfinite(loss)) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(steps + 1));
            }
            adam_step(model.params, result.adam, m.lr, cfg.adam);
            loss_sum += loss;
            ++steps;
        }
        m.train_l1 = loss_sum / static_cast<double>(steps);
        if (eval_set && eval_set->size() > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
            m.eval_psnr = held_out_psnr(model, *eval_set, cfg.eval_scales);
        }
        result.log.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    return result;
}

std::string format_psnr(double db) {
    if (std::isnan(db)) return "";
    if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << db;
    return os.str();
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
    std::ostringstream os;
    os << "epoch,lr,train_l1,eval_psnr_x2,eval_psnr_x3,eval_psnr_x4\n";
    for (const auto& m : log) {
        os << m.epoch << ',' << std::setprecision(9) << m.lr << ',' << std::setprecision(9) << m.train_l1;
        for (double s : {2.0, 3.0, 4.0}) {
            auto it = m.eval_psnr.find(s);
            os << ',' << (it == m.eval_psnr.end() ? std::string() : format_psnr(it->second));
        }
        os << '\n';
    }
    return os.str();
}

} // namespace cufsr
