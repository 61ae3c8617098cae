#include "imprint/sampler.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "imprint/error.hpp"

namespace imprint {

BatchStream::BatchStream(std::span<const std::size_t> indices, std::span<const int> labels, std::vector<int> classes,
                         std::size_t batch_size, std::size_t num_batches, std::uint64_t seed)
    : classes_(std::move(classes)), batch_size_(batch_size), num_batches_(num_batches), rng_(seed) {
    if (batch_size_ == 0) throw ContractError("batch stream: batch_size must be positive");
    if (classes_.empty()) {
        std::set<int> present;
        for (auto i : indices) present.insert(labels[i]);
        classes_.assign(present.begin(), present.end());
    }
    if (classes_.empty()) throw DataError("batch stream: no examples to sample");
    pools_.resize(classes_.size());
    for (auto i : indices) {
        if (i >= labels.size()) throw IndexError("batch stream: index " + std::to_string(i) + " beyond label list");
        const auto it = std::find(classes_.begin(), classes_.end(), labels[i]);
        if (it != classes_.end()) pools_[it - classes_.begin()].push_back(i);
    }
    for (std::size_t c = 0; c < pools_.size(); ++c) {
        if (pools_[c].empty()) {
            throw DataError("batch stream: class " + std::to_string(classes_[c]) + " has no examples to sample");
        }
        std::sort(pools_[c].begin(), pools_[c].end());
    }
}

std::vector<std::size_t> BatchStream::next() {
    if (!has_next()) throw ContractError("batch stream exhausted");
    ++emitted_;
    std::uniform_int_distribution<std::size_t> pick_class(0, pools_.size() - 1);
    std::vector<std::size_t> batch(batch_size_);
    for (auto& slot : batch) {
        const auto& pool = pools_[pick_class(rng_)];
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        slot = pool[pick(rng_)];
    }
    return batch;
}

BatchStream oversample_batches(std::span<const std::size_t> indices, std::span<const int> labels,
                               std::vector<int> classes, std::size_t batch_size, std::size_t num_batches,
                               std::uint64_t seed) {
    return BatchStream(indices, labels, std::move(classes), batch_size, num_batches, seed);
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::span<const std::size_t> indices, std::size_t batch_size,
                                                       std::uint64_t seed) {
    if (batch_size == 0) throw ContractError("shuffled_batches: batch_size must be positive");
    std::vector<std::size_t> order(indices.begin(), indices.end());
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const auto end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

std::size_t batches_per_epoch(std::size_t train_size, std::size_t batch_size) {
    if (batch_size == 0) throw ContractError("batch_size must be positive");
    return (train_size + batch_size - 1) / batch_size;
}

}  // namespace imprint
