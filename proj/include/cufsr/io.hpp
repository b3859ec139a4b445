#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "cufsr/model.hpp"
#include "cufsr/optim.hpp"
#include "cufsr/train.hpp"

namespace cufsr {

using Json = nlohmann::ordered_json;

/// Malformed or inconsistent configuration or checkpoint input.
class FormatError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// --- configuration --------------------------------------------------------

Json to_json(const EncodingConfig& c);
Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);

/// Strict readers: every key is optional (defaults fill in), unknown keys and
/// wrong types throw FormatError. The result is validated.
EncodingConfig encoding_config_from_json(const Json& j, const std::string& where);
ModelConfig model_config_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j);

/// Procedurally generated image set used when no directory is given.
struct SyntheticData {
    int count = 32;
    int size = 64;
    std::uint64_t seed = 0;
    bool operator==(const SyntheticData&) const = default;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::uint64_t model_seed = 0;
    std::string train_dir;   // empty: use train_synthetic
    std::string eval_dir;    // empty: use eval_synthetic (count 0 disables evaluation)
    SyntheticData train_synthetic{32, 64, 1};
    SyntheticData eval_synthetic{8, 64, 2};
    std::string output_dir = "run";
    std::string checkpoint = "model.cuf";
    std::string metrics = "metrics.csv";
    std::string effective_config = "effective_config.json";

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);
/// Parses a JSON file; relative dataset and output paths stay as written.
RunConfig load_run_config(const std::filesystem::path& path);

// --- checkpoints ----------------------------------------------------------

/// "CUF1", u64 little-endian header length, UTF-8 JSON header, then raw f32
/// little-endian row-major tensors at the byte offsets listed in the header.
struct TensorFile {
    Json header;  // everything except tensor_table
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

std::string encode_tensor_file(const TensorFile& file);
TensorFile decode_tensor_file(const std::string& bytes);

void write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    SrModel<float> model;
    std::optional<AdamState<float>> adam;
};

std::string encode_checkpoint(const SrModel<float>& model, const AdamState<float>* adam = nullptr);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const SrModel<float>& model,
                     const AdamState<float>* adam = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Discrete-kernel artifact: the kernel bank for one integer scale plus the
/// encoder and dense weights needed to decode with it. The kernel field
/// itself is not stored.
struct InstantiatedCheckpoint {
    SrModel<float> model;
    InstantiatedKernels<float> kernels;
};

std::string encode_kernel_bank(const SrModel<float>& model, const InstantiatedKernels<float>& kernels);
InstantiatedCheckpoint decode_kernel_bank(const std::string& bytes);

/// "model" or "instantiated", read from the header only.
std::string checkpoint_kind(const std::string& bytes);

} // namespace cufsr
