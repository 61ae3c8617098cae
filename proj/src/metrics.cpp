#include "imprint/metrics.hpp"

#include <cmath>
#include <string>

#include "imprint/error.hpp"

namespace imprint {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : classes_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes == 0) throw ContractError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int truth, int predicted) {
    const auto c = static_cast<int>(classes_);
    if (truth < 0 || truth >= c || predicted < 0 || predicted >= c) {
        throw IndexError("confusion matrix: class pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                         ") outside [0, " + std::to_string(classes_) + ")");
    }
    ++counts_[truth * classes_ + predicted];
}

void ConfusionMatrix::add_all(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw DimensionError("confusion matrix: label and prediction counts differ");
    for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
    return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t predicted) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < classes_; ++t) s += at(t, predicted);
    return s;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t s = 0;
    for (auto v : counts_) s += v;
    return s;
}

std::size_t ConfusionMatrix::correct() const {
    std::size_t s = 0;
    for (std::size_t c = 0; c < classes_; ++c) s += at(c, c);
    return s;
}

nlohmann::json ConfusionMatrix::to_json() const {
    auto rows = nlohmann::json::array();
    for (std::size_t t = 0; t < classes_; ++t) {
        std::vector<std::size_t> row(counts_.begin() + t * classes_, counts_.begin() + (t + 1) * classes_);
        rows.push_back(row);
    }
    return rows;
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& doc) {
    const auto rows = doc.get<std::vector<std::vector<std::size_t>>>();
    ConfusionMatrix cm(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != rows.size()) throw DataError("confusion matrix must be square");
        for (std::size_t p = 0; p < rows.size(); ++p) cm.counts_[t * rows.size() + p] = rows[t][p];
    }
    return cm;
}

std::optional<double> sensitivity(const ConfusionMatrix& cm, std::size_t c) {
    if (c >= cm.num_classes()) throw IndexError("sensitivity: class " + std::to_string(c) + " out of range");
    const auto positives = cm.row_sum(c);
    if (positives == 0) return std::nullopt;
    return static_cast<double>(cm.at(c, c)) / static_cast<double>(positives);
}

std::optional<double> ppv(const ConfusionMatrix& cm, std::size_t c) {
    if (c >= cm.num_classes()) throw IndexError("ppv: class " + std::to_string(c) + " out of range");
    const auto predicted = cm.col_sum(c);
    if (predicted == 0) return std::nullopt;
    return static_cast<double>(cm.at(c, c)) / static_cast<double>(predicted);
}

std::vector<std::optional<double>> per_class_sensitivity(const ConfusionMatrix& cm) {
    std::vector<std::optional<double>> out;
    for (std::size_t c = 0; c < cm.num_classes(); ++c) out.push_back(sensitivity(cm, c));
    return out;
}

std::vector<std::optional<double>> per_class_ppv(const ConfusionMatrix& cm) {
    std::vector<std::optional<double>> out;
    for (std::size_t c = 0; c < cm.num_classes(); ++c) out.push_back(ppv(cm, c));
    return out;
}

MacroAverage macro_average(std::span<const std::optional<double>> values) {
    MacroAverage out;
    double total = 0;
    for (const auto& v : values) {
        if (!v) continue;
        total += *v;
        ++out.defined_count;
    }
    if (out.defined_count > 0) out.value = total / static_cast<double>(out.defined_count);
    return out;
}

FoldSummary summarize(std::span<const std::optional<double>> values) {
    // Welford's single pass.
    FoldSummary out;
    double mean = 0, m2 = 0;
    for (const auto& v : values) {
        if (!v) continue;
        ++out.defined;
        const double delta = *v - mean;
        mean += delta / static_cast<double>(out.defined);
        m2 += delta * (*v - mean);
    }
    if (out.defined >= 1) out.mean = mean;
    if (out.defined >= 2) out.std = std::sqrt(m2 / static_cast<double>(out.defined - 1));
    return out;
}

nlohmann::json optional_to_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from_json(const nlohmann::json& v) {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

}  // namespace imprint
