#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace imprint {

/// C x C counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes);

    void add(int truth, int predicted);
    void add_all(std::span<const int> truth, std::span<const int> predicted);

    std::size_t num_classes() const { return classes_; }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
    std::size_t row_sum(std::size_t truth) const;
    std::size_t col_sum(std::size_t predicted) const;
    std::size_t total() const;
    std::size_t correct() const;

    nlohmann::json to_json() const;
    static ConfusionMatrix from_json(const nlohmann::json& doc);

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t classes_;
    std::vector<std::size_t> counts_;
};

/// TP / (TP + FN); empty when the class never occurs.
std::optional<double> sensitivity(const ConfusionMatrix& cm, std::size_t c);

/// TP / (TP + FP); empty when the class is never predicted.
std::optional<double> ppv(const ConfusionMatrix& cm, std::size_t c);

std::vector<std::optional<double>> per_class_sensitivity(const ConfusionMatrix& cm);
std::vector<std::optional<double>> per_class_ppv(const ConfusionMatrix& cm);

struct MacroAverage {
    std::optional<double> value;
    std::size_t defined_count = 0;
};

/// Unweighted mean over the defined entries.
MacroAverage macro_average(std::span<const std::optional<double>> values);

/// Mean and sample (n-1) standard deviation over the defined entries. The
/// mean needs one defined value, the standard deviation two.
struct FoldSummary {
    std::optional<double> mean;
    std::optional<double> std;
    std::size_t defined = 0;
};

FoldSummary summarize(std::span<const std::optional<double>> values);

/// `null` for an undefined rate.
nlohmann::json optional_to_json(const std::optional<double>& v);
std::optional<double> optional_from_json(const nlohmann::json& v);

}  // namespace imprint
