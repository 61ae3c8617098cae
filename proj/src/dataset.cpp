#include "imprint/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "imprint/error.hpp"
#include "imprint/rng.hpp"

namespace imprint {

Dataset::Dataset(std::size_t dim, std::vector<double> features, std::vector<int> labels,
                 std::vector<std::string> class_names, Provenance provenance)
    : dim_(dim),
      features_(std::move(features)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)),
      provenance_(std::move(provenance)) {
    if (dim_ == 0) throw DataError("dataset: feature dimension must be positive");
    if (features_.size() != labels_.size() * dim_) {
        throw DataError("dataset: " + std::to_string(features_.size()) + " feature values for " +
                        std::to_string(labels_.size()) + " rows of width " + std::to_string(dim_));
    }
    const auto counts = class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) throw DataError("dataset: class '" + class_names_[c] + "' has no examples");
    }
}

int Dataset::class_index(const std::string& name) const {
    for (std::size_t c = 0; c < class_names_.size(); ++c) {
        if (class_names_[c] == name) return static_cast<int>(c);
    }
    throw DataError("dataset has no class named '" + name + "'");
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(class_names_.size(), 0);
    for (int y : labels_) {
        if (y < 0 || static_cast<std::size_t>(y) >= counts.size()) {
            throw DataError("dataset: label " + std::to_string(y) + " outside [0, " + std::to_string(counts.size()) +
                            ")");
        }
        ++counts[y];
    }
    return counts;
}

template <typename T>
Tensor<T> Dataset::gather(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw DataError("dataset: cannot gather an empty batch");
    std::vector<T> out;
    out.reserve(indices.size() * dim_);
    for (auto i : indices) {
        if (i >= size()) throw IndexError("dataset: row " + std::to_string(i) + " out of range");
        for (double v : row(i)) out.push_back(static_cast<T>(v));
    }
    return Tensor<T>({indices.size(), dim_}, std::move(out));
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(labels_.at(i));
    return out;
}

template Tensor<float> Dataset::gather<float>(std::span<const std::size_t>) const;
template Tensor<double> Dataset::gather<double>(std::span<const std::size_t>) const;

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> ParseError {
        return ParseError(source + ":" + std::to_string(line_no) + ": " + what);
    };

    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto header = split_fields(trim(line));
        if (trim(header[0]) != "label") throw fail("header must start with 'label'");
        for (std::size_t j = 1; j < header.size(); ++j) {
            if (trim(header[j]) != "f" + std::to_string(j - 1)) {
                throw fail("header column " + std::to_string(j) + " must be 'f" + std::to_string(j - 1) + "'");
            }
        }
        dim = header.size() - 1;
        break;
    }
    if (dim == 0) throw fail("missing header or no feature columns");

    std::vector<double> features;
    std::vector<int> labels;
    std::vector<std::string> names;
    std::map<std::string, int, std::less<>> index;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty()) continue;
        const auto fields = split_fields(content);
        if (fields.size() != dim + 1) {
            throw fail("expected " + std::to_string(dim + 1) + " fields, found " + std::to_string(fields.size()));
        }
        const auto name = trim(fields[0]);
        if (name.empty()) throw fail("empty label");
        auto it = index.find(name);
        if (it == index.end()) {
            it = index.emplace(std::string(name), static_cast<int>(names.size())).first;
            names.emplace_back(name);
        }
        labels.push_back(it->second);
        for (std::size_t j = 1; j <= dim; ++j) {
            const auto field = trim(fields[j]);
            double value = 0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
            if (ec != std::errc() || ptr != field.data() + field.size()) {
                throw fail("non-numeric feature '" + std::string(field) + "' in column f" + std::to_string(j - 1));
            }
            if (!std::isfinite(value)) throw fail("non-finite feature in column f" + std::to_string(j - 1));
            features.push_back(value);
        }
    }
    if (labels.empty()) throw fail("no data rows");
    return Dataset(dim, std::move(features), std::move(labels), std::move(names),
                   {Provenance::Kind::File, 0, source});
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path.string());
}

std::string format_csv(const Dataset& dataset) {
    std::string out = "label";
    for (std::size_t j = 0; j < dataset.dim(); ++j) out += ",f" + std::to_string(j);
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out += dataset.class_names()[dataset.labels()[i]];
        for (double v : dataset.row(i)) {
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out += ',';
            out.append(buf, ptr);
        }
        out += '\n';
    }
    return out;
}

void save_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset " + path.string());
    out << format_csv(dataset);
}

std::vector<double> SyntheticSpec::novel_mean() const {
    std::vector<double> mean = base_means.at(1);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += novel_affinity * novel_offset[j];
    return mean;
}

void SyntheticSpec::validate() const {
    if (input_dim == 0) throw DataError("synthetic: input_dim must be positive");
    if (class_names.size() != 3 || counts.size() != 3 || stddevs.size() != 3) {
        throw DataError("synthetic: expected two base classes and one novel class");
    }
    if (base_means.size() != 2) throw DataError("synthetic: expected two base means");
    for (const auto& m : base_means) {
        if (m.size() != input_dim) throw DataError("synthetic: base mean length differs from input_dim");
    }
    if (novel_offset.size() != input_dim) throw DataError("synthetic: novel offset length differs from input_dim");
    for (auto c : counts) {
        if (c < 1) throw DataError("synthetic: every class count must be >= 1");
    }
    for (auto s : stddevs) {
        if (!(s > 0)) throw DataError("synthetic: standard deviations must be positive");
    }
    if (!(novel_affinity >= 0.0 && novel_affinity <= 1.0)) throw DataError("synthetic: novel_affinity must be in [0,1]");
}

SyntheticSpec default_synthetic_spec(std::size_t input_dim, double base_separation, double novel_offset) {
    SyntheticSpec spec;
    spec.input_dim = input_dim;
    spec.base_means.assign(2, std::vector<double>(input_dim, 0.0));
    spec.novel_offset.assign(input_dim, 0.0);
    spec.base_means[0][0] = -base_separation / 2;
    spec.base_means[1][0] = base_separation / 2;
    if (input_dim > 1) {
        spec.novel_offset[1] = novel_offset;
    } else {
        spec.novel_offset[0] = novel_offset;
    }
    return spec;
}

Dataset synth_generate(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::vector<std::vector<double>> means{spec.base_means[0], spec.base_means[1], spec.novel_mean()};

    std::vector<double> features;
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < spec.counts[c]; ++i) {
            for (std::size_t j = 0; j < spec.input_dim; ++j) {
                features.push_back(means[c][j] + spec.stddevs[c] * normal(rng));
            }
            labels.push_back(c);
        }
    }
    return Dataset(spec.input_dim, std::move(features), std::move(labels), spec.class_names,
                   {Provenance::Kind::Synthetic, seed, ""});
}

}  // namespace imprint
