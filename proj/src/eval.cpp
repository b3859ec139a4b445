#include "cufsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cufsr/grid.hpp"
#include "cufsr/ops.hpp"

namespace cufsr {

ColorSpace color_space_from_string(const std::string& s) {
    if (s == "rgb" || s == "RGB") return ColorSpace::Rgb;
    if (s == "y" || s == "Y") return ColorSpace::Y;
    throw std::invalid_argument("unknown color space '" + s + "' (expected rgb or y)");
}

double PsnrTable::mean(double scale) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
        if (r.scale != scale) continue;
        acc += r.psnr;
        ++n;
    }
    if (n == 0) throw std::out_of_range("PsnrTable: no rows at scale " + std::to_string(scale));
    return acc / static_cast<double>(n);
}

std::string PsnrTable::csv() const {
    std::ostringstream os;
    os << "image,scale,psnr\n";
    std::vector<double> scales;
    for (const auto& r : rows) {
        os << r.image << ',' << r.scale << ',' << format_psnr(r.psnr) << '\n';
        if (std::find(scales.begin(), scales.end(), r.scale) == scales.end()) scales.push_back(r.scale);
    }
    for (double s : scales) os << "mean," << s << ',' << format_psnr(mean(s)) << '\n';
    return os.str();
}

PsnrTable psnr_eval(const Upscaler& model, const Dataset& hr, const Dataset* lr_images, const std::vector<double>& scales,
                    ColorSpace space, int border) {
    if (scales.empty()) throw std::invalid_argument("psnr_eval: no scales requested");
    if (border < 0) throw std::invalid_argument("psnr_eval: border must be >= 0");
    if (lr_images) {
        if (scales.size() != 1) throw std::invalid_argument("psnr_eval: explicit LR images pair with exactly one scale");
        if (lr_images->size() != hr.size()) {
            throw std::invalid_argument("psnr_eval: " + std::to_string(lr_images->size()) + " LR images for " +
                                        std::to_string(hr.size()) + " HR images");
        }
    }
    PsnrTable table;
    for (double s : scales) {
        if (!(s >= 1.0)) throw std::invalid_argument("psnr_eval: scale must be >= 1");
        for (std::size_t i = 0; i < hr.size(); ++i) {
            const Image& ref = hr.images[i];
            const Image lr = lr_images ? lr_images->images[i] : bicubic_resize(ref, 1.0 / s, 1.0 / s);
            Image sr = model(lr, s);
            if (sr.dim(0) > ref.dim(0) || sr.dim(1) > ref.dim(1)) {
                throw std::invalid_argument("psnr_eval: output " + shape_str(sr.shape()) + " larger than reference " +
                                            shape_str(ref.shape()) + " for " + hr.names[i]);
            }
            for (auto& v : sr.data()) v = std::clamp(v, 0.0f, 1.0f);
            const Image target = crop(ref, 0, 0, sr.dim(0), sr.dim(1));
            const double db = space == ColorSpace::Rgb ? psnr(sr, target, border)
                                                       : psnr(rgb_to_y(sr), rgb_to_y(target), border);
            table.rows.push_back({hr.names[i], s, db});
        }
    }
    return table;
}

Image geo_ensemble(const Upscaler& model, const Image& lr, double s) {
    std::vector<double> acc;
    Shape shape;
    for (int t = 0; t < 8; ++t) {
        const Image out = invert_dihedral(model(apply_dihedral(lr, t), s), t);
        if (t == 0) {
            shape = out.shape();
            acc.assign(static_cast<std::size_t>(out.numel()), 0.0);
        } else if (out.shape() != shape) {
            throw ShapeError("geo_ensemble: transform " + std::to_string(t) + " produced " + shape_str(out.shape()) +
                             ", expected " + shape_str(shape));
        }
        const auto d = out.data();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i];
    }
    Image result(shape);
    for (std::size_t i = 0; i < acc.size(); ++i) result[static_cast<std::int64_t>(i)] = static_cast<float>(acc[i] / 8.0);
    return result;
}

Upscaler bicubic_upscaler() {
    return [](const Image& lr, double s) { return bicubic_resize(lr, s, s); };
}

Upscaler model_upscaler(const SrModel<float>& model) {
    return [&model](const Image& lr, double s) { return upscale(model, lr, s, s); };
}

// ---------------------------------------------------------------------------
// cost accounting

std::string to_string(CostHead head) {
    switch (head) {
    case CostHead::CufInstantiated:
        return "cuf_instantiated";
    case CostHead::CufContinuous:
        return "cuf_continuous";
    default:
        return "subpixel";
    }
}

CostHead cost_head_from_string(const std::string& s) {
    if (s == "cuf_instantiated") return CostHead::CufInstantiated;
    if (s == "cuf_continuous") return CostHead::CufContinuous;
    if (s == "subpixel") return CostHead::SubPixel;
    throw std::invalid_argument("unknown head '" + s + "' (expected cuf_instantiated, cuf_continuous or subpixel)");
}

std::int64_t CostReport::total_mults() const {
    std::int64_t n = 0;
    for (const auto& st : stages) n += st.mults;
    return n;
}

std::int64_t CostReport::peak_elems() const {
    std::int64_t n = 0;
    for (const auto& st : stages) n = std::max(n, st.peak_elems);
    return n;
}

std::int64_t CostReport::stage_mults(const std::string& name) const {
    for (const auto& st : stages)
        if (st.name == name) return st.mults;
    return 0;
}

std::string CostReport::csv() const {
    std::ostringstream os;
    os << "# multiplications only (additions are not counted); peak_elems = live intermediate tensor elements\n";
    os << "# head=" << to_string(query.head) << " H=" << query.height << " W=" << query.width << " s=" << query.scale
       << " C=" << query.channels << " K=" << query.kernel << " N_out=" << query.n_out << " out=" << out_height << 'x'
       << out_width;
    if (query.head == CostHead::CufContinuous) os << " unique_offsets=" << unique_offsets;
    os << '\n';
    os << "stage,mults,peak_elems\n";
    for (const auto& st : stages) os << st.name << ',' << st.mults << ',' << st.peak_elems << '\n';
    os << "total," << total_mults() << ',' << peak_elems() << '\n';
    return os.str();
}

namespace {

// Straight-line liveness: every tensor is allocated when produced and freed
// after its last use.
class LiveSet {
public:
    void alloc(const std::string& name, std::int64_t n) {
        sizes_[name] = n;
        live_ += n;
        peak_ = std::max(peak_, live_);
    }
    void free(const std::string& name) {
        auto it = sizes_.find(name);
        if (it == sizes_.end()) throw std::logic_error("LiveSet: " + name + " is not live");
        live_ -= it->second;
        sizes_.erase(it);
    }
    void rename(const std::string& from, const std::string& to) {
        auto n = sizes_.at(from);
        sizes_.erase(from);
        sizes_[to] = n;
    }
    /// Peak since the previous call; restarts the window at the current level.
    std::int64_t take_peak() {
        const auto p = peak_;
        peak_ = live_;
        return p;
    }

private:
    std::map<std::string, std::int64_t> sizes_;
    std::int64_t live_ = 0;
    std::int64_t peak_ = 0;
};

int integer_scale(const CostQuery& q) {
    const double r = std::round(q.scale);
    if (std::abs(q.scale - r) > 1e-9 || r < 1.0) {
        throw std::invalid_argument(to_string(q.head) + " needs an integer scale >= 1, got " + std::to_string(q.scale));
    }
    return static_cast<int>(r);
}

void validate_query(const CostQuery& q) {
    if (q.height < 1 || q.width < 1) throw std::invalid_argument("cost: input size must be >= 1");
    if (!(q.scale >= 1.0)) throw std::invalid_argument("cost: scale must be >= 1");
    if (q.channels < 1 || q.kernel < 1 || q.kernel % 2 == 0 || q.n_out < 1 || q.hidden < 1 || q.field_layers < 1 ||
        q.field_input < 1) {
        throw std::invalid_argument("cost: channels, odd kernel, n_out, hidden, layers and field input must be >= 1");
    }
    if (q.encoder_blocks && *q.encoder_blocks < 0) throw std::invalid_argument("cost: encoder blocks must be >= 0");
    if (q.head != CostHead::CufContinuous) integer_scale(q);
}

std::int64_t distinct_offsets(std::int64_t n_out, double s) {
    std::set<std::int64_t> seen;
    for (std::int64_t t = 0; t < n_out; ++t) seen.insert(std::llround(subpixel_coord(t, s).delta * 1e9));
    return static_cast<std::int64_t>(seen.size());
}

constexpr int kEncoderKernel = 3;

} // namespace

CostReport count_mults(const CostQuery& q) {
    validate_query(q);
    CostReport r;
    r.query = q;
    r.out_height = scaled_extent(q.height, q.scale);
    r.out_width = scaled_extent(q.width, q.scale);
    const std::int64_t HW = q.height * q.width, C = q.channels, K = q.kernel, taps = K * K, N = q.n_out;
    const std::int64_t P = r.out_pixels();
    const std::int64_t HWC = HW * C;

    LiveSet live;
    if (q.encoder_blocks) {
        const std::int64_t ek = kEncoderKernel * kEncoderKernel;
        const int B = *q.encoder_blocks;
        live.alloc("image", HW * 3);
        live.alloc("head", HWC);
        live.free("image");
        std::string x = "head";
        for (int b = 0; b < B; ++b) {
            live.alloc("h", HWC);
            live.alloc("c2", HWC);
            live.free("h");
            live.alloc("x_next", HWC);
            live.free("c2");
            if (x != "head") live.free(x);
            live.rename("x_next", "x");
            x = "x";
        }
        live.alloc("tail", HWC);
        if (x != "head") live.free(x);
        live.alloc("features", HWC);
        live.free("tail");
        live.free("head");
        const std::int64_t mults = HW * ek * (3 * C + (2 * static_cast<std::int64_t>(B) + 1) * C * C);
        r.stages.push_back({"encoder", mults, live.take_peak()});
    } else {
        live.alloc("features", HWC);
        live.take_peak();
    }

    std::int64_t per_query = 0;  // one pass of the kernel field MLP
    for (std::int64_t l = 0, in = q.field_input; l < q.field_layers; ++l) {
        const std::int64_t out = l + 1 == q.field_layers ? C : q.hidden;
        per_query += in * out;
        in = out;
    }

    auto project = [&](const std::string& in, std::int64_t width) {
        if (q.head != CostHead::SubPixel) {
            live.alloc("dense1", P * C);
            live.free(in);
            live.alloc("relu", P * C);
            live.free("dense1");
            r.stages.push_back({"dense", P * C * C, live.take_peak()});
            live.alloc("rgb", P * 3);
            live.free("relu");
            r.stages.push_back({"projection", P * C * 3, live.take_peak()});
        } else {
            live.alloc("rgb", P * 3);
            live.free(in);
            r.stages.push_back({"projection", P * width * 3, live.take_peak()});
        }
    };

    switch (q.head) {
    case CostHead::CufInstantiated: {
        const std::int64_t s2 = static_cast<std::int64_t>(integer_scale(q)) * integer_scale(q);
        r.unique_offsets = s2;
        // the kernel bank is computed once ahead of inference
        live.alloc("bank", s2 * taps * C);
        r.stages.push_back({"hypernetwork", 0, live.take_peak()});
        live.alloc("expanded", HWC * s2);
        live.free("features");
        live.free("bank");
        live.alloc("shuffled", HWC * s2);
        live.free("expanded");
        r.stages.push_back({"depthwise", P * C * taps, live.take_peak()});
        project("shuffled", C);
        break;
    }
    case CostHead::CufContinuous: {
        r.unique_offsets = distinct_offsets(r.out_height, q.scale) * distinct_offsets(r.out_width, q.scale);
        const std::int64_t rows = r.unique_offsets * taps;
        live.alloc("unfolded", HWC * taps);
        live.free("features");
        live.alloc("field_in", rows * q.field_input);
        std::string prev = "field_in";
        for (int l = 0; l < q.field_layers; ++l) {
            const bool last = l + 1 == q.field_layers;
            const std::string name = "field" + std::to_string(l);
            live.alloc(name, rows * (last ? C : q.hidden));
            live.free(prev);
            prev = name;
            if (!last) {
                live.alloc(name + "_relu", rows * q.hidden);
                live.free(name);
                prev = name + "_relu";
            }
        }
        r.stages.push_back({"hypernetwork", rows * per_query, live.take_peak()});
        live.alloc("gathered", P * C);
        live.free("unfolded");
        live.free(prev);
        r.stages.push_back({"depthwise", P * C * taps, live.take_peak()});
        project("gathered", C);
        break;
    }
    case CostHead::SubPixel: {
        const std::int64_t s2 = static_cast<std::int64_t>(integer_scale(q)) * integer_scale(q);
        live.alloc("expanded", HW * s2 * N);
        live.free("features");
        live.alloc("shuffled", HW * s2 * N);
        live.free("expanded");
        r.stages.push_back({"expansion", HW * taps * C * s2 * N, live.take_peak()});
        project("shuffled", N);
        break;
    }
    }
    return r;
}

CostReport instrumented_mults(const CostQuery& q, std::uint64_t seed, std::int64_t* whole_pass) {
    CostReport r = count_mults(q);  // shapes and liveness; the counts are replaced below
    ModelConfig mc;
    mc.encoder.channels = q.channels;
    mc.encoder.blocks = q.encoder_blocks.value_or(0);
    mc.encoder.kernel = kEncoderKernel;
    if (q.head == CostHead::SubPixel) {
        mc.head = HeadKind::SubPixel;
        mc.subpixel = {q.channels, integer_scale(q), q.kernel, q.n_out};
    } else {
        mc.cuf.channels = q.channels;
        mc.cuf.kernel = q.kernel;
        mc.cuf.hidden = q.hidden;
        mc.cuf.layers = q.field_layers;
        if (mc.cuf.input_width() != q.field_input) {
            throw std::invalid_argument("instrumented_mults: field input width " + std::to_string(q.field_input) +
                                        " differs from the default encodings (" +
                                        std::to_string(mc.cuf.input_width()) + ")");
        }
    }
    const auto model = SrModel<float>::create(mc, seed);
    const auto p = Binding<float>::constants(model.params);
    Rng rng(seed ^ 0x5eedULL);
    Image image(Shape{q.height, q.width, 3});
    for (auto& v : image.data()) v = static_cast<float>(rng.uniform());

    auto counted = [](auto&& fn) {
        MultiplyCounter mc;
        fn();
        return mc.count();
    };
    std::map<std::string, std::int64_t> got;
    Var<float> feats;
    got["encoder"] = counted([&] { feats = encode(mc.encoder, p, Var<float>(image)); });
    std::int64_t whole = 0;

    switch (q.head) {
    case CostHead::CufInstantiated: {
        const auto kernels = instantiate(mc.cuf, p, integer_scale(q));
        Var<float> out;
        const auto head = counted([&] { out = decode_instantiated(mc.cuf, p, kernels, feats); });
        // re-run the shared tail on the same depthwise output to split it
        const int s = kernels.scale;
        const std::int64_t s2 = static_cast<std::int64_t>(s) * s, taps = static_cast<std::int64_t>(q.kernel) * q.kernel;
        Tensor<float> w(Shape{q.channels * s2, q.kernel, q.kernel});
        for (std::int64_t c = 0; c < q.channels; ++c)
            for (std::int64_t g = 0; g < s2; ++g)
                for (std::int64_t t = 0; t < taps; ++t)
                    w[(c * s2 + g) * taps + t] = kernels.weights[(g * taps + t) * q.channels + c];
        Var<float> shuffled;
        got["depthwise"] = counted([&] {
            shuffled = pixel_shuffle(depthwise_conv2d(feats, Var<float>(std::move(w)), q.kernel / 2, static_cast<int>(s2)), s);
        });
        got["dense"] = counted([&] { dense(shuffled, p("head.dense1.weight"), p("head.dense1.bias")); });
        got["projection"] = counted([&] { cuf_project(p, shuffled); }) - got["dense"];
        got["hypernetwork"] = 0;
        whole = head;
        if (q.encoder_blocks) whole = counted([&] { upscale_instantiated(model, kernels, image); });
        break;
    }
    case CostHead::CufContinuous: {
        Var<float> unfolded = unfold(feats, q.kernel);
        const auto plan = full_decode_plan(q.height, q.width, {q.scale, q.scale});
        Var<float> bank;
        got["hypernetwork"] = counted([&] { bank = kernel_bank(mc.cuf, p, plan.deltas, plan.scale); });
        Var<float> gathered;
        got["depthwise"] = counted([&] { gathered = depthwise_gather(unfolded, bank, plan.gather); });
        got["dense"] = counted([&] { dense(gathered, p("head.dense1.weight"), p("head.dense1.bias")); });
        got["projection"] = counted([&] { cuf_project(p, gathered); }) - got["dense"];
        whole = counted([&] { decode_continuous(mc.cuf, p, unfolded, q.scale, q.scale); });
        if (q.encoder_blocks) whole = counted([&] { upscale(model, image, q.scale, q.scale); });
        break;
    }
    case CostHead::SubPixel: {
        whole = counted([&] { subpixel_forward(mc.subpixel, p, feats); });
        Var<float> expanded;
        got["expansion"] =
            counted([&] { expanded = conv2d(feats, p("head.expansion.weight"), p("head.expansion.bias"), q.kernel / 2); });
        Var<float> shuffled = pixel_shuffle(expanded, mc.subpixel.scale);
        got["projection"] = counted([&] { dense(shuffled, p("head.projection.weight"), p("head.projection.bias")); });
        if (q.encoder_blocks) whole = counted([&] { upscale(model, image, q.scale, q.scale); });
        break;
    }
    }
    for (auto& st : r.stages) st.mults = got.at(st.name);
    if (whole_pass) *whole_pass = whole;
    return r;
}

// ---------------------------------------------------------------------------
// filter redundancy

std::vector<double> symmetric_eigenvalues(std::vector<double> a, int n) {
    if (n < 0 || a.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
        throw std::invalid_argument("symmetric_eigenvalues: expected an n x n matrix");
    }
    auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    double scale = 0.0;
    for (double v : a) scale += v * v;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off <= 1e-30 * scale || off == 0.0) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = at(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

EigenGroup row_pca(const std::vector<double>& rows, int n_rows, int n_cols) {
    if (n_rows < 2) throw std::invalid_argument("row_pca: need at least 2 rows");
    if (n_cols < 1 || rows.size() != static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols)) {
        throw std::invalid_argument("row_pca: matrix size mismatch");
    }
    std::vector<double> x = rows;
    for (int j = 0; j < n_cols; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n_rows; ++i) mean += x[static_cast<std::size_t>(i) * n_cols + j];
        mean /= n_rows;
        for (int i = 0; i < n_rows; ++i) x[static_cast<std::size_t>(i) * n_cols + j] -= mean;
    }
    std::vector<double> gram(static_cast<std::size_t>(n_rows) * n_rows);
    for (int i = 0; i < n_rows; ++i) {
        for (int k = i; k < n_rows; ++k) {
            double acc = 0.0;
            for (int j = 0; j < n_cols; ++j)
                acc += x[static_cast<std::size_t>(i) * n_cols + j] * x[static_cast<std::size_t>(k) * n_cols + j];
            gram[static_cast<std::size_t>(i) * n_rows + k] = acc;
            gram[static_cast<std::size_t>(k) * n_rows + i] = acc;
        }
    }
    EigenGroup g;
    const double denom = n_rows - 1;
    for (int i = 0; i < n_rows; ++i) g.total_variance += gram[static_cast<std::size_t>(i) * n_rows + i] / denom;
    g.eigenvalues = symmetric_eigenvalues(std::move(gram), n_rows);
    // the Gram matrix is PSD; rounding can leave tiny negative values
    for (auto& e : g.eigenvalues) e = std::max(e, 0.0) / denom;
    double run = 0.0;
    for (double e : g.eigenvalues) {
        run += e;
        g.cumvar.push_back(g.total_variance > 0.0 ? std::min(run / g.total_variance, 1.0) : 0.0);
    }
    if (g.total_variance > 0.0) g.cumvar.back() = 1.0;
    return g;
}

std::string EigenReport::csv() const {
    std::ostringstream os;
    os << "group,index,eigenvalue,cumvar\n";
    os << std::setprecision(12);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t i = 0; i < groups[g].eigenvalues.size(); ++i)
            os << g << ',' << i << ',' << groups[g].eigenvalues[i] << ',' << groups[g].cumvar[i] << '\n';
    return os.str();
}

EigenReport filter_pca_subpixel(const Tensor<float>& expansion_weight, int s) {
    const std::int64_t s2 = static_cast<std::int64_t>(s) * s;
    if (s2 < 2) throw std::invalid_argument("filter_pca: scale " + std::to_string(s) + " gives fewer than 2 filters");
    const auto& w = expansion_weight;
    if (w.rank() != 4 || w.dim(0) % s2 != 0) {
        throw ShapeError("filter_pca: expansion weight " + shape_str(w.shape()) + " is not [s^2*N, C, K, K]");
    }
    const std::int64_t groups = w.dim(0) / s2, cols = w.dim(1) * w.dim(2) * w.dim(3);
    EigenReport r{"subpixel", s, {}};
    std::vector<double> m(static_cast<std::size_t>(s2 * cols));
    for (std::int64_t n = 0; n < groups; ++n) {
        for (std::int64_t g = 0; g < s2; ++g)
            for (std::int64_t j = 0; j < cols; ++j) m[g * cols + j] = w[(n * s2 + g) * cols + j];
        r.groups.push_back(row_pca(m, static_cast<int>(s2), static_cast<int>(cols)));
    }
    return r;
}

EigenReport filter_pca_cuf(const InstantiatedKernels<float>& kernels) {
    const int s = kernels.scale;
    const std::int64_t s2 = static_cast<std::int64_t>(s) * s;
    if (s2 < 2) throw std::invalid_argument("filter_pca: scale " + std::to_string(s) + " gives fewer than 2 filters");
    const auto& w = kernels.weights;
    if (w.rank() != 3 || w.dim(0) != s2) throw ShapeError("filter_pca: kernel bank " + shape_str(w.shape()) + " is not [s^2,K^2,C]");
    const std::int64_t taps = w.dim(1), C = w.dim(2);
    EigenReport r{"cuf", s, {}};
    std::vector<double> m(static_cast<std::size_t>(s2 * taps));
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t g = 0; g < s2; ++g)
            for (std::int64_t t = 0; t < taps; ++t) m[g * taps + t] = w[(g * taps + t) * C + c];
        r.groups.push_back(row_pca(m, static_cast<int>(s2), static_cast<int>(taps)));
    }
    return r;
}

EigenReport filter_pca(const SrModel<float>& model, int s) {
    if (model.config.head == HeadKind::SubPixel) {
        if (s != model.config.subpixel.scale) {
            throw std::invalid_argument("filter_pca: sub-pixel model is fixed at scale " +
                                        std::to_string(model.config.subpixel.scale));
        }
        return filter_pca_subpixel(model.params.at("head.expansion.weight").value, s);
    }
    if (s * s < 2) throw std::invalid_argument("filter_pca: scale " + std::to_string(s) + " gives fewer than 2 filters");
    const auto p = Binding<float>::constants(model.params);
    return filter_pca_cuf(instantiate(model.config.cuf, p, s));
}

} // namespace cufsr
