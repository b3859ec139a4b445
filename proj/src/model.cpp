#include "cufsr/model.hpp"

#include <cmath>
#include <stdexcept>

#include "cufsr/ops.hpp"

namespace cufsr {

std::string to_string(HeadKind kind) { return kind == HeadKind::Cuf ? "cuf" : "subpixel"; }

HeadKind head_kind_from_string(const std::string& s) {
    if (s == "cuf") return HeadKind::Cuf;
    if (s == "subpixel") return HeadKind::SubPixel;
    throw std::invalid_argument("unknown head kind '" + s + "' (expected cuf or subpixel)");
}

void ModelConfig::validate() const {
    encoder.validate();
    if (head == HeadKind::Cuf) {
        cuf.validate();
        if (cuf.channels != encoder.channels) throw std::invalid_argument("cuf channels must equal encoder channels");
    } else {
        subpixel.validate();
        if (subpixel.channels != encoder.channels) {
            throw std::invalid_argument("subpixel channels must equal encoder channels");
        }
    }
}

template <typename T>
SrModel<T> SrModel<T>::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    SrModel<T> m{config, {}};
    Rng rng(seed);
    Rng enc_rng = rng.fork(1);
    Rng head_rng = rng.fork(2);
    init_encoder(m.params, config.encoder, enc_rng);
    if (config.head == HeadKind::Cuf) {
        init_cuf_head(m.params, config.cuf, head_rng);
    } else {
        init_subpixel_head(m.params, config.subpixel, head_rng);
    }
    return m;
}

template <typename T>
Var<T> forward_patch(const ModelConfig& cfg, const Binding<T>& p, const Var<T>& lr_patch, const CropPair& where) {
    const auto lr_h = lr_patch.value().dim(0), lr_w = lr_patch.value().dim(1);
    const auto out_h = where.hr.dim(0), out_w = where.hr.dim(1);
    if (cfg.head == HeadKind::Cuf) {
        Var<T> feats = featurize(cfg.encoder, p, lr_patch, cfg.cuf.kernel);
        const auto plan = make_decode_plan(lr_h, lr_w, {where.scale, where.scale}, where.hr_y, where.hr_x, out_h, out_w,
                                           where.lr_y, where.lr_x);
        return decode_plan(cfg.cuf, p, feats, plan);
    }
    const int s = cfg.subpixel.scale;
    if (where.scale != static_cast<double>(s)) {
        throw std::invalid_argument("sub-pixel head is fixed at scale " + std::to_string(s));
    }
    Var<T> full = subpixel_forward(cfg.subpixel, p, encode(cfg.encoder, p, lr_patch));
    return slice_hw(full, where.hr_y - where.lr_y * s, where.hr_x - where.lr_x * s, out_h, out_w);
}

Image upscale(const SrModel<float>& model, const Image& lr, double s_h, double s_w) {
    const auto p = Binding<float>::constants(model.params);
    const auto& cfg = model.config;
    Var<float> in(lr);
    if (cfg.head == HeadKind::Cuf) {
        return decode_continuous(cfg.cuf, p, featurize(cfg.encoder, p, in, cfg.cuf.kernel), s_h, s_w).value();
    }
    const double s = cfg.subpixel.scale;
    if (s_h != s || s_w != s) {
        throw std::invalid_argument("sub-pixel model only decodes scale " + std::to_string(cfg.subpixel.scale));
    }
    return subpixel_forward(cfg.subpixel, p, encode(cfg.encoder, p, in)).value();
}

Image upscale_instantiated(const SrModel<float>& model, const InstantiatedKernels<float>& kernels, const Image& lr) {
    if (model.config.head != HeadKind::Cuf) throw std::invalid_argument("instantiation requires a CUF model");
    const auto p = Binding<float>::constants(model.params);
    Var<float> feats = encode(model.config.encoder, p, Var<float>(lr));
    return decode_instantiated(model.config.cuf, p, kernels, feats).value();
}

template struct SrModel<float>;
template struct SrModel<double>;
template Var<float> forward_patch(const ModelConfig&, const Binding<float>&, const Var<float>&, const CropPair&);
template Var<double> forward_patch(const ModelConfig&, const Binding<double>&, const Var<double>&, const CropPair&);

} // namespace cufsr
