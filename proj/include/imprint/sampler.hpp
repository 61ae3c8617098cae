#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imprint/rng.hpp"

namespace imprint {

/// Class-balanced minibatch stream. Every slot of every batch first picks a
/// class uniformly at random, then an example of that class uniformly with
/// replacement, so minority classes are oversampled to parity.
class BatchStream {
public:
    /// `classes` lists the labels to sample; each must have at least one
    /// member in `indices`. An empty list means every label present.
    BatchStream(std::span<const std::size_t> indices, std::span<const int> labels, std::vector<int> classes,
                std::size_t batch_size, std::size_t num_batches, std::uint64_t seed);

    bool has_next() const { return emitted_ < num_batches_; }
    /// Dataset indices of the next batch.
    std::vector<std::size_t> next();

    std::size_t batch_size() const { return batch_size_; }
    std::size_t num_batches() const { return num_batches_; }
    const std::vector<int>& classes() const { return classes_; }

private:
    std::vector<int> classes_;
    std::vector<std::vector<std::size_t>> pools_;
    std::size_t batch_size_;
    std::size_t num_batches_;
    std::size_t emitted_ = 0;
    Rng rng_;
};

BatchStream oversample_batches(std::span<const std::size_t> indices, std::span<const int> labels,
                               std::vector<int> classes, std::size_t batch_size, std::size_t num_batches,
                               std::uint64_t seed);

/// One epoch of plain shuffled minibatches without replacement (the last
/// batch may be short). Used when oversampling is switched off.
std::vector<std::vector<std::size_t>> shuffled_batches(std::span<const std::size_t> indices, std::size_t batch_size,
                                                       std::uint64_t seed);

/// Batches per epoch: ceil(train size / batch size).
std::size_t batches_per_epoch(std::size_t train_size, std::size_t batch_size);

}  // namespace imprint
