#include "cufsr/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace cufsr {

namespace {

constexpr char kMagic[4] = {'C', 'U', 'F', '1'};

// Reads typed keys from one JSON object and rejects anything it did not read.
class Fields {
public:
    Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw FormatError(where_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        const Json& v = *it;
        const std::string path = where_ + "." + key;
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw FormatError(path + ": expected a boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw FormatError(path + ": expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned()) {
                    out = v.get<T>();
                } else if (v.get<std::int64_t>() < 0) {
                    throw FormatError(path + ": expected a non-negative integer");
                } else {
                    out = static_cast<T>(v.get<std::int64_t>());
                }
            } else {
                const auto x = v.get<std::int64_t>();
                if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
                    throw FormatError(path + ": integer out of range");
                }
                out = static_cast<T>(x);
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw FormatError(path + ": expected a number");
            out = v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw FormatError(path + ": expected a string");
            out = v.get<std::string>();
        } else {
            // std::vector of int or double
            if (!v.is_array()) throw FormatError(path + ": expected an array");
            T items;
            for (const auto& e : v) {
                using E = typename T::value_type;
                if constexpr (std::is_integral_v<E>) {
                    if (!e.is_number_integer()) throw FormatError(path + ": expected integers");
                } else {
                    if (!e.is_number()) throw FormatError(path + ": expected numbers");
                }
                items.push_back(e.get<E>());
            }
            out = std::move(items);
        }
    }

    const Json* object(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw FormatError(where_ + ": unknown key '" + it.key() + "'");
        }
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

template <typename Fn>
auto checked(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const FormatError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw FormatError(where + ": " + e.what());
    }
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

void put_f32(std::string& out, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return std::bit_cast<float>(bits);
}

Json shape_json(const Shape& s) {
    Json a = Json::array();
    for (auto d : s) a.push_back(d);
    return a;
}

} // namespace

// ---------------------------------------------------------------------------
// configuration

Json to_json(const EncodingConfig& c) {
    return Json{{"n_per_axis", c.n_per_axis}, {"f_max", c.f_max}, {"kind", to_string(c.kind)}};
}

EncodingConfig encoding_config_from_json(const Json& j, const std::string& where) {
    EncodingConfig c;
    Fields f(j, where);
    std::string kind = to_string(c.kind);
    f.get("n_per_axis", c.n_per_axis);
    f.get("f_max", c.f_max);
    f.get("kind", kind);
    f.finish();
    return checked(where, [&] {
        c.kind = encoding_kind_from_string(kind);
        c.validate();
        return c;
    });
}

Json to_json(const ModelConfig& c) {
    return Json{{"encoder", {{"channels", c.encoder.channels}, {"blocks", c.encoder.blocks}, {"kernel", c.encoder.kernel}}},
                {"head", to_string(c.head)},
                {"cuf",
                 {{"delta_encoding", to_json(c.cuf.delta)},
                  {"scale_encoding", to_json(c.cuf.scale)},
                  {"kidx_encoding", to_json(c.cuf.kidx)},
                  {"hidden", c.cuf.hidden},
                  {"layers", c.cuf.layers},
                  {"channels", c.cuf.channels},
                  {"kernel", c.cuf.kernel}}},
                {"subpixel",
                 {{"channels", c.subpixel.channels},
                  {"scale", c.subpixel.scale},
                  {"kernel", c.subpixel.kernel},
                  {"n_out", c.subpixel.n_out}}}};
}

ModelConfig model_config_from_json(const Json& j) {
    ModelConfig c;
    Fields f(j, "model");
    std::string head = to_string(c.head);
    f.get("head", head);
    if (const Json* e = f.object("encoder")) {
        Fields g(*e, "model.encoder");
        g.get("channels", c.encoder.channels);
        g.get("blocks", c.encoder.blocks);
        g.get("kernel", c.encoder.kernel);
        g.finish();
    }
    if (const Json* e = f.object("cuf")) {
        Fields g(*e, "model.cuf");
        if (const Json* x = g.object("delta_encoding")) c.cuf.delta = encoding_config_from_json(*x, "model.cuf.delta_encoding");
        if (const Json* x = g.object("scale_encoding")) c.cuf.scale = encoding_config_from_json(*x, "model.cuf.scale_encoding");
        if (const Json* x = g.object("kidx_encoding")) c.cuf.kidx = encoding_config_from_json(*x, "model.cuf.kidx_encoding");
        g.get("hidden", c.cuf.hidden);
        g.get("layers", c.cuf.layers);
        g.get("channels", c.cuf.channels);
        g.get("kernel", c.cuf.kernel);
        g.finish();
    }
    if (const Json* e = f.object("subpixel")) {
        Fields g(*e, "model.subpixel");
        g.get("channels", c.subpixel.channels);
        g.get("scale", c.subpixel.scale);
        g.get("kernel", c.subpixel.kernel);
        g.get("n_out", c.subpixel.n_out);
        g.finish();
    }
    f.finish();
    return checked("model", [&] {
        c.head = head_kind_from_string(head);
        c.validate();
        return c;
    });
}

Json to_json(const TrainConfig& c) {
    return Json{{"epochs", c.epochs},
                {"batch", c.batch},
                {"crop", c.crop},
                {"lr_initial", c.lr_initial},
                {"milestones", c.milestones},
                {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
                {"scale_min", c.scale_min},
                {"scale_max", c.scale_max},
                {"seed", c.seed},
                {"crops_per_image_per_epoch", c.crops_per_image_per_epoch},
                {"augment", c.augment},
                {"eval_every", c.eval_every},
                {"eval_scales", c.eval_scales}};
}

TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    Fields f(j, "train");
    f.get("epochs", c.epochs);
    f.get("batch", c.batch);
    f.get("crop", c.crop);
    f.get("lr_initial", c.lr_initial);
    f.get("milestones", c.milestones);
    if (const Json* a = f.object("adam")) {
        Fields g(*a, "train.adam");
        g.get("beta1", c.adam.beta1);
        g.get("beta2", c.adam.beta2);
        g.get("eps", c.adam.eps);
        g.finish();
    }
    f.get("scale_min", c.scale_min);
    f.get("scale_max", c.scale_max);
    f.get("seed", c.seed);
    f.get("crops_per_image_per_epoch", c.crops_per_image_per_epoch);
    f.get("augment", c.augment);
    f.get("eval_every", c.eval_every);
    f.get("eval_scales", c.eval_scales);
    f.finish();
    return checked("train", [&] {
        c.validate();
        return c;
    });
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    for (const auto* s : {&train_synthetic, &eval_synthetic}) {
        if (s->count < 0 || s->size < 1) throw std::invalid_argument("synthetic data: count >= 0 and size >= 1 required");
    }
    if (train_dir.empty() && train_synthetic.count < 1) throw std::invalid_argument("no training images configured");
    if (checkpoint.empty() || metrics.empty() || effective_config.empty()) {
        throw std::invalid_argument("output file names must not be empty");
    }
    if (model.head == HeadKind::SubPixel) {
        const double s = model.subpixel.scale;
        if (train.scale_min != s || train.scale_max != s) {
            throw std::invalid_argument("sub-pixel head needs train.scale_min == train.scale_max == subpixel.scale");
        }
    }
}

namespace {

Json to_json(const SyntheticData& s) { return Json{{"count", s.count}, {"size", s.size}, {"seed", s.seed}}; }

SyntheticData synthetic_from_json(const Json& j, const std::string& where) {
    SyntheticData s;
    Fields f(j, where);
    f.get("count", s.count);
    f.get("size", s.size);
    f.get("seed", s.seed);
    f.finish();
    return s;
}

} // namespace

Json to_json(const RunConfig& c) {
    return Json{{"model", to_json(c.model)},
                {"model_seed", c.model_seed},
                {"train", to_json(c.train)},
                {"data",
                 {{"train_dir", c.train_dir},
                  {"eval_dir", c.eval_dir},
                  {"train_synthetic", to_json(c.train_synthetic)},
                  {"eval_synthetic", to_json(c.eval_synthetic)}}},
                {"output",
                 {{"dir", c.output_dir},
                  {"checkpoint", c.checkpoint},
                  {"metrics", c.metrics},
                  {"effective_config", c.effective_config}}}};
}

RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    Fields f(j, "config");
    if (const Json* m = f.object("model")) c.model = model_config_from_json(*m);
    f.get("model_seed", c.model_seed);
    if (const Json* t = f.object("train")) c.train = train_config_from_json(*t);
    if (const Json* d = f.object("data")) {
        Fields g(*d, "config.data");
        g.get("train_dir", c.train_dir);
        g.get("eval_dir", c.eval_dir);
        if (const Json* s = g.object("train_synthetic")) c.train_synthetic = synthetic_from_json(*s, "config.data.train_synthetic");
        if (const Json* s = g.object("eval_synthetic")) c.eval_synthetic = synthetic_from_json(*s, "config.data.eval_synthetic");
        g.finish();
    }
    if (const Json* o = f.object("output")) {
        Fields g(*o, "config.output");
        g.get("dir", c.output_dir);
        g.get("checkpoint", c.checkpoint);
        g.get("metrics", c.metrics);
        g.get("effective_config", c.effective_config);
        g.finish();
    }
    f.finish();
    return checked("config", [&] {
        c.validate();
        return c;
    });
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// tensor files

std::string encode_tensor_file(const TensorFile& file) {
    Json header = file.header;
    Json table = Json::array();
    std::int64_t offset = 0;
    std::set<std::string> names;
    for (const auto& [name, t] : file.tensors) {
        if (!names.insert(name).second) throw std::invalid_argument("tensor file: duplicate tensor '" + name + "'");
        table.push_back(Json{{"name", name}, {"shape", shape_json(t.shape())}, {"byte_offset", offset}});
        offset += t.numel() * 4;
    }
    header["tensor_table"] = std::move(table);
    const std::string text = header.dump();
    std::string out(kMagic, 4);
    put_u64(out, text.size());
    out += text;
    out.reserve(out.size() + static_cast<std::size_t>(offset));
    for (const auto& entry : file.tensors)
        for (float v : entry.second.data()) put_f32(out, v);
    return out;
}

TensorFile decode_tensor_file(const std::string& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
    const std::uint64_t hlen = get_u64(bytes, 4);
    if (hlen > bytes.size() - 12) throw FormatError("checkpoint: header length exceeds file size");
    TensorFile file;
    try {
        file.header = Json::parse(bytes.substr(12, hlen));
    } catch (const Json::parse_error& e) {
        throw FormatError(std::string("checkpoint: header is not valid JSON: ") + e.what());
    }
    if (!file.header.is_object() || !file.header.contains("tensor_table") || !file.header["tensor_table"].is_array()) {
        throw FormatError("checkpoint: header lacks a tensor_table array");
    }
    const std::size_t payload = 12 + hlen;
    const std::uint64_t payload_len = bytes.size() - payload;
    std::uint64_t expected = 0;
    for (const auto& e : file.header["tensor_table"]) {
        if (!e.is_object() || !e.contains("name") || !e["name"].is_string() || !e.contains("shape") ||
            !e["shape"].is_array() || !e.contains("byte_offset") || !e["byte_offset"].is_number_unsigned()) {
            throw FormatError("checkpoint: malformed tensor_table entry");
        }
        const auto name = e["name"].get<std::string>();
        Shape shape;
        for (const auto& d : e["shape"]) {
            if (!d.is_number_unsigned()) throw FormatError("checkpoint: bad shape for '" + name + "'");
            shape.push_back(d.get<std::int64_t>());
        }
        const auto off = e["byte_offset"].get<std::uint64_t>();
        if (off != expected) {
            throw FormatError("checkpoint: tensor '" + name + "' at byte " + std::to_string(off) + ", expected " +
                              std::to_string(expected));
        }
        const auto n = static_cast<std::uint64_t>(shape_numel(shape));
        if (n * 4 > payload_len - off) throw FormatError("checkpoint: payload truncated at tensor '" + name + "'");
        Tensor<float> t(shape);
        const char* src = bytes.data() + payload + off;
        for (std::uint64_t i = 0; i < n; ++i) t[static_cast<std::int64_t>(i)] = get_f32(src + 4 * i);
        file.tensors.emplace_back(name, std::move(t));
        expected = off + n * 4;
    }
    if (expected != payload_len) throw FormatError("checkpoint: payload length does not match the tensor table");
    file.header.erase("tensor_table");
    return file;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

Json checkpoint_header(const std::string& kind, const ModelConfig& config, bool adam) {
    return Json{{"format_version", kCheckpointVersion},
                {"kind", kind},
                {"model_config", to_json(config)},
                {"optimizer_state_present", adam}};
}

struct Parsed {
    TensorFile file;
    ModelConfig config;
    std::map<std::string, const Tensor<float>*> by_name;
};

Parsed parse(const std::string& bytes, const std::string& kind) {
    Parsed p{decode_tensor_file(bytes), {}, {}};
    const Json& h = p.file.header;
    if (!h.contains("format_version") || h["format_version"] != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported format_version");
    }
    const std::string got = h.value("kind", std::string("model"));
    if (got != kind) throw FormatError("checkpoint: expected a " + kind + " checkpoint, found " + got);
    if (!h.contains("model_config")) throw FormatError("checkpoint: header lacks model_config");
    p.config = model_config_from_json(h["model_config"]);
    for (const auto& [name, t] : p.file.tensors) p.by_name[name] = &t;
    return p;
}

const Tensor<float>& take(const Parsed& p, const std::string& name, const Shape& shape) {
    auto it = p.by_name.find(name);
    if (it == p.by_name.end()) throw FormatError("checkpoint: missing tensor '" + name + "'");
    if (it->second->shape() != shape) {
        throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_str(it->second->shape()) + ", expected " +
                          shape_str(shape));
    }
    return *it->second;
}

} // namespace

std::string checkpoint_kind(const std::string& bytes) {
    return decode_tensor_file(bytes).header.value("kind", std::string("model"));
}

std::string encode_checkpoint(const SrModel<float>& model, const AdamState<float>* adam) {
    TensorFile f;
    f.header = checkpoint_header("model", model.config, adam != nullptr);
    for (const auto& p : model.params) f.tensors.emplace_back(p.name, p.value);
    if (adam) {
        if (adam->m.size() != model.params.size() || adam->v.size() != model.params.size()) {
            throw std::invalid_argument("checkpoint: optimizer state does not match the parameters");
        }
        f.header["adam_step"] = adam->step;
        std::size_t i = 0;
        for (const auto& p : model.params) f.tensors.emplace_back("adam.m." + p.name, adam->m[i++]);
        i = 0;
        for (const auto& p : model.params) f.tensors.emplace_back("adam.v." + p.name, adam->v[i++]);
    }
    return encode_tensor_file(f);
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    const Parsed p = parse(bytes, "model");
    const Json& h = p.file.header;
    if (!h.contains("optimizer_state_present") || !h["optimizer_state_present"].is_boolean()) {
        throw FormatError("checkpoint: header lacks optimizer_state_present");
    }
    const bool has_adam = h["optimizer_state_present"].get<bool>();
    Checkpoint ck{SrModel<float>::create(p.config, 0), std::nullopt};
    for (auto& param : ck.model.params) param.value = take(p, param.name, param.value.shape());
    std::size_t expected = ck.model.params.size();
    if (has_adam) {
        if (!h.contains("adam_step") || !h["adam_step"].is_number_integer()) throw FormatError("checkpoint: missing adam_step");
        AdamState<float> st;
        st.step = h["adam_step"].get<std::int64_t>();
        for (const auto& param : ck.model.params) st.m.push_back(take(p, "adam.m." + param.name, param.value.shape()));
        for (const auto& param : ck.model.params) st.v.push_back(take(p, "adam.v." + param.name, param.value.shape()));
        ck.adam = std::move(st);
        expected *= 3;
    }
    if (p.file.tensors.size() != expected) throw FormatError("checkpoint: unexpected extra tensors");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const SrModel<float>& model, const AdamState<float>* adam) {
    write_file(path, encode_checkpoint(model, adam));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

namespace {

bool decoder_param(const std::string& name) { return name.rfind("encoder.", 0) == 0 || name.rfind("head.dense", 0) == 0; }

} // namespace

std::string encode_kernel_bank(const SrModel<float>& model, const InstantiatedKernels<float>& kernels) {
    if (model.config.head != HeadKind::Cuf) throw std::invalid_argument("instantiation requires a CUF model");
    TensorFile f;
    f.header = checkpoint_header("instantiated", model.config, false);
    f.header["scale"] = kernels.scale;
    f.tensors.emplace_back("kernels", kernels.weights);
    for (const auto& p : model.params)
        if (decoder_param(p.name)) f.tensors.emplace_back(p.name, p.value);
    return encode_tensor_file(f);
}

InstantiatedCheckpoint decode_kernel_bank(const std::string& bytes) {
    const Parsed p = parse(bytes, "instantiated");
    const Json& h = p.file.header;
    if (!h.contains("scale") || !h["scale"].is_number_integer() || h["scale"].get<int>() < 1) {
        throw FormatError("checkpoint: instantiated checkpoint lacks an integer scale");
    }
    if (p.config.head != HeadKind::Cuf) throw FormatError("checkpoint: instantiated checkpoint must hold a CUF model");
    const int s = h["scale"].get<int>();
    const auto& cfg = p.config.cuf;
    InstantiatedCheckpoint out{SrModel<float>{p.config, {}}, {}};
    out.kernels.scale = s;
    out.kernels.weights =
        take(p, "kernels", Shape{static_cast<std::int64_t>(s) * s, static_cast<std::int64_t>(cfg.kernel) * cfg.kernel, cfg.channels});
    const auto reference = SrModel<float>::create(p.config, 0);
    for (const auto& param : reference.params) {
        if (decoder_param(param.name)) out.model.params.add(param.name, take(p, param.name, param.value.shape()));
    }
    if (p.file.tensors.size() != out.model.params.size() + 1) throw FormatError("checkpoint: unexpected extra tensors");
    return out;
}

} // namespace cufsr
