#pragma once

#include <filesystem>
#include <string>

#include "imprint/model.hpp"
#include "json.hpp"

namespace imprint {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    /// Epoch the parameters were taken from; -1 for untrained parameters.
    int epoch = -1;
    double val_accuracy = 0.0;
    std::string stage;
};

nlohmann::json network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& doc);

/// JSON checkpoint: network spec, named flattened parameter arrays and
/// training metadata. Values are written as shortest round-trip decimals, so
/// save followed by load reproduces every parameter bit for bit.
template <typename T>
nlohmann::json checkpoint_to_json(const ModelParams<T>& params, const CheckpointMeta& meta);

template <typename T>
ModelParams<T> checkpoint_from_json(const nlohmann::json& doc, CheckpointMeta* meta = nullptr);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params, const CheckpointMeta& meta);

template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace imprint
