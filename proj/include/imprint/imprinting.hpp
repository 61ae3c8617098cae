#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imprint/model.hpp"

namespace imprint {

class Dataset;

/// Means shorter than this are rejected as degenerate.
inline constexpr double kDegenerateImprintEps = 1e-8;

/// Unit-length novel-class weight: the renormalized mean of the examples'
/// L2-normalized embeddings. `novel_examples` is [n x input_dim], n >= 1.
///
/// The embeddings are summed in lexicographic order of their values, so the
/// result does not depend on the row order of `novel_examples`.
template <typename T>
EmbeddingVector<T> compute_imprinted_vector(const ModelParams<T>& base, const Tensor<T>& novel_examples);

/// (C+1)-class copy of a Normalized-head model with `imprinted` inserted as
/// column `insertion_index` (0..C). Base columns and every other layer are
/// copied unchanged.
template <typename T>
ModelParams<T> imprint_extend_head(const ModelParams<T>& base, const EmbeddingVector<T>& imprinted,
                                   std::size_t insertion_index);

/// Imprints exactly the given novel examples (dataset rows) into a base
/// model. The novel column goes in at `novel_class`, so class indices of the
/// extended model equal the dataset's labels.
template <typename T>
ModelParams<T> imprint_from_indices(const ModelParams<T>& base, const Dataset& dataset,
                                    std::span<const std::size_t> novel_indices, int novel_class);

/// Draws an n-shot subset of the novel class from `train_indices` and
/// imprints it. Returns the extended model; `chosen`, when given, receives
/// the selected dataset indices.
template <typename T>
ModelParams<T> imprint_pipeline(const ModelParams<T>& base, const Dataset& dataset,
                                std::span<const std::size_t> train_indices, int novel_class, std::size_t n_shots,
                                std::uint64_t seed, std::vector<std::size_t>* chosen = nullptr);

}  // namespace imprint
