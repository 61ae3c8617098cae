#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imprint/dataset.hpp"
#include "imprint/model.hpp"
#include "imprint/optim.hpp"
#include "json.hpp"

namespace imprint {

/// Number of novel training examples; empty means all of them.
struct NShot {
    std::optional<std::size_t> count;

    static NShot all() { return {}; }
    static NShot of(std::size_t n) { return {n}; }
    std::string label() const;
    bool operator==(const NShot&) const = default;
};

/// Ascending, with "all" last.
bool operator<(const NShot& a, const NShot& b);

struct SyntheticConfig {
    std::size_t input_dim = 32;
    std::vector<std::string> class_names{"normal", "pneumonia", "novel"};
    std::vector<std::size_t> counts{800, 550, 50};
    std::vector<double> stddevs{1.0, 1.0, 1.0};
    double novel_affinity = 0.35;
    double base_separation = 3.0;
    double novel_offset_scale = 8.0;
    std::uint64_t seed = 0;

    SyntheticSpec spec() const;
};

struct DatasetSource {
    /// CSV to load; empty means generate from `synthetic`.
    std::string path;
    std::string novel_class = "novel";
    SyntheticConfig synthetic;
};

struct ExperimentConfig {
    int epochs = 40;
    double base_lr = 1e-3;
    double lr_multiplier = 10.0;
    int lr_step = 4;
    double lr_decay = 0.94;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t batch_size = 64;
    int k_folds = 10;
    double val_frac = 0.1;
    std::vector<NShot> n_shot{NShot::of(20), NShot::of(50), NShot::of(100), NShot::of(200), NShot::of(300), NShot::all()};
    std::uint64_t seed = 0;
    /// Apply class-uniform oversampling to base-class training as well.
    bool oversample_base = true;
    /// Only hidden_dims, embedding_dim, joint_bias and norm_eps are read;
    /// input width and class count come from the data.
    NetworkSpec network;
    DatasetSource dataset;

    LrSchedule schedule() const { return {base_lr, lr_step, lr_decay}; }
};

struct ConfigResult {
    /// Set only when `errors` is empty.
    std::optional<ExperimentConfig> config;
    std::vector<std::string> errors;
};

/// Missing fields take their defaults; unknown keys and out-of-range values
/// are all reported, each prefixed with its path.
ConfigResult validate_config(const nlohmann::json& document);

/// Throws ConfigError listing every problem.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const nlohmann::json& document);

nlohmann::json config_to_json(const ExperimentConfig& config);

/// Dataset named by the config: the CSV when a path is set, otherwise the
/// synthetic generator.
Dataset load_dataset(const DatasetSource& source);

}  // namespace imprint
