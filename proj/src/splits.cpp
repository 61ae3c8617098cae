#include "imprint/splits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "imprint/error.hpp"
#include "imprint/rng.hpp"

namespace imprint {

using nlohmann::json;

namespace {

// Class -> ascending member indices.
std::map<int, std::vector<std::size_t>> group_by_class(std::span<const std::size_t> indices,
                                                       std::span<const int> labels) {
    std::map<int, std::vector<std::size_t>> groups;
    for (auto i : indices) {
        if (i >= labels.size()) throw IndexError("index " + std::to_string(i) + " beyond label list");
        groups[labels[i]].push_back(i);
    }
    for (auto& [c, members] : groups) std::sort(members.begin(), members.end());
    return groups;
}

}  // namespace

const std::vector<std::size_t>& FoldPlan::test_indices(int fold) const {
    if (fold < 0 || fold >= static_cast<int>(folds.size())) {
        throw IndexError("fold " + std::to_string(fold) + " outside [0, " + std::to_string(folds.size()) + ")");
    }
    return folds[fold];
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
    const auto& test = test_indices(fold);
    std::vector<std::size_t> out;
    out.reserve(num_examples - test.size());
    std::size_t t = 0;
    for (std::size_t i = 0; i < num_examples; ++i) {
        if (t < test.size() && test[t] == i) {
            ++t;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

void FoldPlan::validate() const {
    if (k < 2 || folds.size() != static_cast<std::size_t>(k)) throw DataError("fold plan: expected k >= 2 folds");
    std::vector<int> seen(num_examples, 0);
    for (const auto& fold : folds) {
        if (!std::is_sorted(fold.begin(), fold.end())) throw DataError("fold plan: fold indices must be ascending");
        for (auto i : fold) {
            if (i >= num_examples) throw DataError("fold plan: index " + std::to_string(i) + " out of range");
            if (seen[i]++) throw DataError("fold plan: index " + std::to_string(i) + " appears twice");
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw DataError("fold plan: folds do not cover every example");
}

json FoldPlan::to_json() const {
    return {{"k", k}, {"seed", seed}, {"num_examples", num_examples}, {"folds", folds}};
}

FoldPlan FoldPlan::from_json(const json& doc) {
    FoldPlan plan;
    try {
        plan.k = doc.at("k").get<int>();
        plan.seed = doc.at("seed").get<std::uint64_t>();
        plan.num_examples = doc.at("num_examples").get<std::size_t>();
        plan.folds = doc.at("folds").get<std::vector<std::vector<std::size_t>>>();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed fold plan: ") + e.what());
    }
    plan.validate();
    return plan;
}

void FoldPlan::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write fold plan " + path.string());
    out << to_json().dump() << '\n';
}

FoldPlan FoldPlan::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open fold plan " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("fold plan " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(doc);
}

FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw ContractError("stratified_kfold: k must be >= 2");
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto groups = group_by_class(all, labels);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.num_examples = labels.size();
    plan.folds.assign(k, {});

    std::size_t next_fold = 0;
    for (auto& [c, members] : groups) {
        if (members.size() < static_cast<std::size_t>(k)) {
            throw StratificationError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                                      " examples, fewer than k=" + std::to_string(k));
        }
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
        std::shuffle(members.begin(), members.end(), rng);
        for (auto i : members) {
            plan.folds[next_fold].push_back(i);
            next_fold = (next_fold + 1) % k;
        }
    }
    for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
    return plan;
}

TrainValSplit train_val_split(std::span<const std::size_t> train_indices, std::span<const int> labels, double frac,
                              std::uint64_t seed) {
    if (!(frac > 0.0 && frac < 1.0)) throw ContractError("train_val_split: frac must be in (0,1)");
    TrainValSplit split;
    for (auto& [c, members] : group_by_class(train_indices, labels)) {
        auto n_val = static_cast<std::size_t>(std::floor(frac * static_cast<double>(members.size()) + 0.5));
        if (members.size() >= 2) n_val = std::max<std::size_t>(n_val, 1);
        n_val = std::min(n_val, members.size() - 1);
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
        std::shuffle(members.begin(), members.end(), rng);
        split.val.insert(split.val.end(), members.begin(), members.begin() + n_val);
        split.train.insert(split.train.end(), members.begin() + n_val, members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    return split;
}

std::vector<std::size_t> select_nshot(std::span<const std::size_t> train_indices, std::span<const int> labels,
                                      int novel_class, std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> pool;
    for (auto i : train_indices) {
        if (i >= labels.size()) throw IndexError("index " + std::to_string(i) + " beyond label list");
        if (labels[i] == novel_class) pool.push_back(i);
    }
    std::sort(pool.begin(), pool.end());
    if (n > pool.size()) {
        throw DataError("n-shot selection: requested " + std::to_string(n) + " novel examples but only " +
                        std::to_string(pool.size()) + " are in the training partition");
    }
    if (n == pool.size()) return pool;
    Rng rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<std::size_t> filter_out_class(std::span<const std::size_t> indices, std::span<const int> labels,
                                          int excluded) {
    std::vector<std::size_t> out;
    for (auto i : indices) {
        if (labels[i] != excluded) out.push_back(i);
    }
    return out;
}

std::string fingerprint(std::span<const std::size_t> indices) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto i : indices) {
        auto v = static_cast<std::uint64_t>(i);
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace imprint
