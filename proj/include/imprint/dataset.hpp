#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "imprint/tensor.hpp"

namespace imprint {

/// Where a dataset came from, recorded in manifests.
struct Provenance {
    enum class Kind { Memory, Synthetic, File };
    Kind kind = Kind::Memory;
    std::uint64_t seed = 0;
    std::string path;
};

/// Feature matrix (N x D, row-major) with integer labels and class names.
/// Every class has at least one example.
class Dataset {
public:
    Dataset(std::size_t dim, std::vector<double> features, std::vector<int> labels,
            std::vector<std::string> class_names, Provenance provenance = {});

    std::size_t size() const { return labels_.size(); }
    std::size_t dim() const { return dim_; }
    std::size_t num_classes() const { return class_names_.size(); }

    std::span<const double> row(std::size_t i) const { return {features_.data() + i * dim_, dim_}; }
    std::span<const double> features() const { return features_; }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<std::string>& class_names() const { return class_names_; }
    const Provenance& provenance() const { return provenance_; }

    /// Index of a class name; throws DataError when absent.
    int class_index(const std::string& name) const;
    std::vector<std::size_t> class_counts() const;

    /// Rows at `indices` as a [|indices| x D] tensor.
    template <typename T>
    Tensor<T> gather(std::span<const std::size_t> indices) const;
    std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

private:
    std::size_t dim_;
    std::vector<double> features_;
    std::vector<int> labels_;
    std::vector<std::string> class_names_;
    Provenance provenance_;
};

/// Reads `label,f0,...,f{D-1}`. Class names are indexed in order of first
/// appearance. Malformed rows raise ParseError naming the line.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text, const std::string& source = "<memory>");

/// Writes shortest round-trip decimals, so load_csv(save_csv(d)) == d.
void save_csv(const std::filesystem::path& path, const Dataset& dataset);
std::string format_csv(const Dataset& dataset);

/// Two base classes and one novel class drawn from isotropic Gaussians.
/// The novel mean sits at base_means[1] + novel_affinity * novel_offset, so
/// it overlaps the second base class more than the first.
struct SyntheticSpec {
    std::size_t input_dim = 32;
    std::vector<std::string> class_names{"normal", "pneumonia", "novel"};
    /// Per-class counts; default keeps the 7966 : 5469 : 507 class ratio.
    std::vector<std::size_t> counts{800, 550, 50};
    std::vector<std::vector<double>> base_means;
    std::vector<double> novel_offset;
    std::vector<double> stddevs{1.0, 1.0, 1.0};
    double novel_affinity = 0.35;

    std::vector<double> novel_mean() const;
    void validate() const;
};

/// Default geometry in `input_dim` dimensions: base means at -s/2 and +s/2
/// along the first axis (s = base_separation), novel offset of length
/// `novel_offset` along the second axis.
SyntheticSpec default_synthetic_spec(std::size_t input_dim = 32, double base_separation = 3.0,
                                     double novel_offset = 8.0);

Dataset synth_generate(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace imprint
