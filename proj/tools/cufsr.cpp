// cufsr: train, run and analyse continuous-upsampling super-resolution models.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "cufsr/eval.hpp"
#include "cufsr/io.hpp"

namespace fs = std::filesystem;
using namespace cufsr;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Inputs that fail to load are a validation problem, not a runtime one.
Image read_image(const fs::path& path) {
    try {
        return load_png(path);
    } catch (const ImageIoError& e) {
        throw std::invalid_argument(e.what());
    }
}

Dataset read_dataset(const fs::path& dir) {
    try {
        return Dataset::from_directory(dir);
    } catch (const ImageIoError& e) {
        throw std::invalid_argument(e.what());
    }
}

void require_parent(const fs::path& out) {
    const auto parent = out.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw std::invalid_argument("output directory does not exist: " + parent.string());
    }
}

int integer_scale(double s, const std::string& what) {
    if (!(s >= 1.0) || s != std::floor(s)) {
        throw std::invalid_argument(what + " needs an integer scale >= 1, got " + std::to_string(s));
    }
    return static_cast<int>(s);
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
    } else {
        write_file(out, text);
    }
}

std::vector<double> parse_scales(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw std::invalid_argument("bad scale '" + item + "' in --scales");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("--scales is empty");
    return out;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string output_dir;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;

    const Dataset train_set = cfg.train_dir.empty()
                                  ? synthetic_dataset(cfg.train_synthetic.count, cfg.train_synthetic.size, cfg.train_synthetic.seed)
                                  : read_dataset(cfg.train_dir);
    Dataset eval_set;
    if (!cfg.eval_dir.empty()) {
        eval_set = read_dataset(cfg.eval_dir);
    } else if (cfg.eval_synthetic.count > 0) {
        eval_set = synthetic_dataset(cfg.eval_synthetic.count, cfg.eval_synthetic.size, cfg.eval_synthetic.seed);
    }
    for (const auto& img : train_set.images) {
        const double lr_side = std::min(img.dim(0), img.dim(1)) / cfg.train.scale_max;
        if (std::floor(lr_side + 1e-9) < cfg.train.crop) {
            throw std::invalid_argument("training image " + shape_str(img.shape()) + " is too small for crop " +
                                        std::to_string(cfg.train.crop) + " at scale " + std::to_string(cfg.train.scale_max));
        }
    }

    const fs::path out_dir = cfg.output_dir;
    fs::create_directories(out_dir);
    write_file(out_dir / cfg.effective_config, to_json(cfg).dump(2) + "\n");

    const auto init = SrModel<float>::create(cfg.model, cfg.model_seed);
    const auto result = train(train_set, eval_set.size() ? &eval_set : nullptr, init, cfg.train, [&](const EpochMetrics& m) {
        if (a.quiet) return;
        std::cerr << "epoch " << m.epoch << " lr " << m.lr << " l1 " << m.train_l1;
        for (const auto& [s, db] : m.eval_psnr) std::cerr << " x" << s << " " << format_psnr(db);
        std::cerr << '\n';
    });
    save_checkpoint(out_dir / cfg.checkpoint, result.model, &result.adam);
    write_file(out_dir / cfg.metrics, metrics_csv(result.log));
    return 0;
}

// --- upscale -----------------------------------------------------------------

struct UpscaleArgs {
    std::string checkpoint, input, output;
    double scale = 2.0;
    bool instantiate = false;
    bool ensemble = false;
};

int cmd_upscale(const UpscaleArgs& a) {
    if (!(a.scale >= 1.0)) throw std::invalid_argument("--scale must be >= 1");
    const std::string bytes = read_file(a.checkpoint);
    const Image lr = read_image(a.input);
    require_parent(a.output);

    Upscaler run;
    std::optional<SrModel<float>> model;
    std::optional<InstantiatedCheckpoint> bank;
    if (checkpoint_kind(bytes) == "instantiated") {
        bank = decode_kernel_bank(bytes);
        if (a.scale != bank->kernels.scale) {
            throw std::invalid_argument("instantiated checkpoint holds scale " + std::to_string(bank->kernels.scale));
        }
        run = [&](const Image& img, double) { return upscale_instantiated(bank->model, bank->kernels, img); };
    } else {
        model = decode_checkpoint(bytes).model;
        if (a.instantiate) {
            const int s = integer_scale(a.scale, "--instantiate");
            if (model->config.head != HeadKind::Cuf) throw std::invalid_argument("--instantiate requires a CUF model");
            const auto p = Binding<float>::constants(model->params);
            bank = InstantiatedCheckpoint{*model, instantiate(model->config.cuf, p, s)};
            run = [&](const Image& img, double) { return upscale_instantiated(bank->model, bank->kernels, img); };
        } else {
            if (model->config.head == HeadKind::SubPixel && a.scale != model->config.subpixel.scale) {
                throw std::invalid_argument("sub-pixel model only decodes scale " +
                                            std::to_string(model->config.subpixel.scale));
            }
            run = model_upscaler(*model);
        }
    }
    const Image out = a.ensemble ? geo_ensemble(run, lr, a.scale) : run(lr, a.scale);
    save_png(out, a.output);
    return 0;
}

// --- instantiate -------------------------------------------------------------

int cmd_instantiate(const std::string& checkpoint, double scale, const std::string& output) {
    const int s = integer_scale(scale, "instantiate");
    const auto ck = load_checkpoint(checkpoint);
    if (ck.model.config.head != HeadKind::Cuf) throw std::invalid_argument("instantiate requires a CUF model");
    require_parent(output);
    const auto p = Binding<float>::constants(ck.model.params);
    write_file(output, encode_kernel_bank(ck.model, instantiate(ck.model.config.cuf, p, s)));
    return 0;
}

// --- flops -------------------------------------------------------------------

struct FlopsArgs {
    std::string head = "cuf_instantiated";
    CostQuery q;
    int encoder_blocks = -1;
    bool instrumented = false;
};

int cmd_flops(FlopsArgs a) {
    a.q.head = cost_head_from_string(a.head);
    if (a.encoder_blocks >= 0) a.q.encoder_blocks = a.encoder_blocks;
    const CostReport r = a.instrumented ? instrumented_mults(a.q, 0) : count_mults(a.q);
    std::cout << r.csv();
    return 0;
}

// --- psnr --------------------------------------------------------------------

struct PsnrArgs {
    std::string checkpoint;
    bool bicubic = false;
    std::string hr, lr, scales = "2,3,4", space = "rgb", output;
    int border = 0;
    bool ensemble = false;
};

int cmd_psnr(const PsnrArgs& a) {
    if (a.bicubic == !a.checkpoint.empty()) throw std::invalid_argument("give either a checkpoint or --bicubic");
    const auto scales = parse_scales(a.scales);
    const ColorSpace space = color_space_from_string(a.space);
    const Dataset hr = read_dataset(a.hr);
    std::optional<Dataset> lr;
    if (!a.lr.empty()) lr = read_dataset(a.lr);
    if (!a.output.empty()) require_parent(a.output);

    std::optional<SrModel<float>> model;
    Upscaler run = bicubic_upscaler();
    if (!a.bicubic) {
        model = load_checkpoint(a.checkpoint).model;
        if (model->config.head == HeadKind::SubPixel) {
            for (double s : scales)
                if (s != model->config.subpixel.scale) {
                    throw std::invalid_argument("sub-pixel model cannot decode scale " + std::to_string(s));
                }
        }
        run = model_upscaler(*model);
    }
    if (a.ensemble) run = [inner = run](const Image& img, double s) { return geo_ensemble(inner, img, s); };
    emit(psnr_eval(run, hr, lr ? &*lr : nullptr, scales, space, a.border).csv(), a.output);
    return 0;
}

// --- analyze-filters ---------------------------------------------------------

int cmd_analyze(const std::string& checkpoint, int scale, const std::string& output) {
    if (scale < 2) throw std::invalid_argument("--scale must be >= 2 (at least two filters per group)");
    const auto ck = load_checkpoint(checkpoint);
    if (!output.empty()) require_parent(output);
    emit(filter_pca(ck.model, scale).csv(), output);
    return 0;
}

// --- synth -------------------------------------------------------------------

int cmd_synth(const std::string& dir, int count, int size, std::uint64_t seed) {
    if (count < 1 || size < 1) throw std::invalid_argument("--count and --size must be >= 1");
    fs::create_directories(dir);
    const auto d = synthetic_dataset(static_cast<std::size_t>(count), size, seed);
    for (std::size_t i = 0; i < d.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "synth_%04zu.png", i);
        save_png(d.images[i], fs::path(dir) / name);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous upsampling filter super-resolution"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON run configuration");
    train_cmd->add_option("config", ta.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--output-dir", ta.output_dir, "Override output.dir from the configuration");
    train_cmd->add_flag("-q,--quiet", ta.quiet, "No per-epoch progress on stderr");

    UpscaleArgs ua;
    auto* up_cmd = app.add_subcommand("upscale", "Super-resolve one PNG");
    up_cmd->add_option("checkpoint", ua.checkpoint, "Model or instantiated checkpoint")->required()->check(CLI::ExistingFile);
    up_cmd->add_option("input", ua.input, "Input PNG")->required()->check(CLI::ExistingFile);
    up_cmd->add_option("output", ua.output, "Output PNG")->required();
    up_cmd->add_option("-s,--scale", ua.scale, "Upscaling factor (any real >= 1)")->required();
    up_cmd->add_flag("--instantiate", ua.instantiate, "Decode through discrete kernels (integer scales)");
    up_cmd->add_flag("--geo-ensemble", ua.ensemble, "Average over the 8 flips/rotations");

    std::string inst_ck, inst_out;
    double inst_scale = 0.0;
    auto* inst_cmd = app.add_subcommand("instantiate", "Write the discrete kernel bank for one integer scale");
    inst_cmd->add_option("checkpoint", inst_ck, "Model checkpoint")->required()->check(CLI::ExistingFile);
    inst_cmd->add_option("output", inst_out, "Instantiated checkpoint to write")->required();
    inst_cmd->add_option("-s,--scale", inst_scale, "Integer scale")->required();

    FlopsArgs fa;
    auto* flops_cmd = app.add_subcommand("flops", "Multiplication and memory report (CSV on stdout)");
    flops_cmd->add_option("--head", fa.head, "cuf_instantiated, cuf_continuous or subpixel")->capture_default_str();
    flops_cmd->add_option("--height", fa.q.height, "LR height")->capture_default_str();
    flops_cmd->add_option("--width", fa.q.width, "LR width")->capture_default_str();
    flops_cmd->add_option("--scale", fa.q.scale, "Scale")->capture_default_str();
    flops_cmd->add_option("--channels", fa.q.channels, "Feature channels C")->capture_default_str();
    flops_cmd->add_option("--kernel", fa.q.kernel, "Kernel size K")->capture_default_str();
    flops_cmd->add_option("--n-out", fa.q.n_out, "Sub-pixel post-shuffle channels")->capture_default_str();
    flops_cmd->add_option("--hidden", fa.q.hidden, "Kernel field hidden width")->capture_default_str();
    flops_cmd->add_option("--encoder-blocks", fa.encoder_blocks, "Include an encoder with this many blocks");
    flops_cmd->add_flag("--instrumented", fa.instrumented, "Measure by running the operators");

    PsnrArgs pa;
    auto* psnr_cmd = app.add_subcommand("psnr", "PSNR table (CSV)");
    psnr_cmd->add_option("checkpoint", pa.checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
    psnr_cmd->add_flag("--bicubic", pa.bicubic, "Evaluate bicubic interpolation instead of a model");
    psnr_cmd->add_option("--hr", pa.hr, "Directory of HR PNGs")->required()->check(CLI::ExistingDirectory);
    psnr_cmd->add_option("--lr", pa.lr, "Directory of matching LR PNGs (one scale)")->check(CLI::ExistingDirectory);
    psnr_cmd->add_option("--scales", pa.scales, "Comma separated scales")->capture_default_str();
    psnr_cmd->add_option("--space", pa.space, "rgb or y")->capture_default_str();
    psnr_cmd->add_option("--border", pa.border, "Pixels cropped from each side")->capture_default_str();
    psnr_cmd->add_flag("--geo-ensemble", pa.ensemble, "Average over the 8 flips/rotations");
    psnr_cmd->add_option("-o,--output", pa.output, "CSV file (default stdout)");

    std::string an_ck, an_out;
    int an_scale = 3;
    auto* an_cmd = app.add_subcommand("analyze-filters", "Eigen-spectra of the upsampling filters (CSV)");
    an_cmd->add_option("checkpoint", an_ck, "Model checkpoint")->required()->check(CLI::ExistingFile);
    an_cmd->add_option("-s,--scale", an_scale, "Integer scale")->capture_default_str();
    an_cmd->add_option("-o,--output", an_out, "CSV file (default stdout)");

    std::string syn_dir;
    int syn_count = 32, syn_size = 64;
    std::uint64_t syn_seed = 1;
    auto* syn_cmd = app.add_subcommand("synth", "Write procedural texture PNGs");
    syn_cmd->add_option("dir", syn_dir, "Output directory")->required();
    syn_cmd->add_option("--count", syn_count, "Number of images")->capture_default_str();
    syn_cmd->add_option("--size", syn_size, "Side length")->capture_default_str();
    syn_cmd->add_option("--seed", syn_seed, "Seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    try {
        if (*train_cmd) return cmd_train(ta);
        if (*up_cmd) return cmd_upscale(ua);
        if (*inst_cmd) return cmd_instantiate(inst_ck, inst_scale, inst_out);
        if (*flops_cmd) return cmd_flops(fa);
        if (*psnr_cmd) return cmd_psnr(pa);
        if (*an_cmd) return cmd_analyze(an_ck, an_scale, an_out);
        if (*syn_cmd) return cmd_synth(syn_dir, syn_count, syn_size, syn_seed);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitValidation;
}
