#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace imprint {

/// k disjoint test folds covering every example exactly once.
struct FoldPlan {
    int k = 10;
    std::uint64_t seed = 0;
    std::size_t num_examples = 0;
    /// Ascending dataset indices per fold.
    std::vector<std::vector<std::size_t>> folds;

    const std::vector<std::size_t>& test_indices(int fold) const;
    /// Every index not in `fold`, ascending.
    std::vector<std::size_t> train_indices(int fold) const;

    /// Throws DataError unless the folds partition [0, num_examples).
    void validate() const;

    nlohmann::json to_json() const;
    static FoldPlan from_json(const nlohmann::json& doc);
    void save(const std::filesystem::path& path) const;
    static FoldPlan load(const std::filesystem::path& path);
};

/// Per class, shuffles that class's indices and deals them round-robin over
/// the folds. Each class continues dealing where the previous one stopped,
/// which keeps total fold sizes within one of each other as well.
FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

struct TrainValSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Stratified hold-out: per class, round-half-up(frac * count) examples go
/// to validation, at least one whenever the class has two or more.
TrainValSplit train_val_split(std::span<const std::size_t> train_indices, std::span<const int> labels, double frac,
                              std::uint64_t seed);

/// Uniform n-subset (without replacement) of the novel-class members of
/// `train_indices`, ascending.
std::vector<std::size_t> select_nshot(std::span<const std::size_t> train_indices, std::span<const int> labels,
                                      int novel_class, std::size_t n, std::uint64_t seed);

/// Members of `indices` whose label is not `excluded`.
std::vector<std::size_t> filter_out_class(std::span<const std::size_t> indices, std::span<const int> labels,
                                          int excluded);

/// Stable 64-bit FNV-1a digest of an index list, as 16 hex digits.
std::string fingerprint(std::span<const std::size_t> indices);

}  // namespace imprint
