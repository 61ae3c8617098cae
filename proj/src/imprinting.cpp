#include "imprint/imprinting.hpp"

#include <algorithm>
#include <cmath>

#include "imprint/dataset.hpp"
#include "imprint/error.hpp"
#include "imprint/splits.hpp"

namespace imprint {

template <typename T>
EmbeddingVector<T> compute_imprinted_vector(const ModelParams<T>& base, const Tensor<T>& novel_examples) {
    if (base.spec.head_kind != HeadKind::Normalized) {
        throw ContractError("imprinting requires a model with a normalized head");
    }
    auto embeddings = embed_batch(base, novel_examples, /*normalize=*/true);
    if (embeddings.empty()) throw ContractError("imprinting needs at least one novel example");

    std::vector<std::vector<T>> rows;
    rows.reserve(embeddings.size());
    for (auto& e : embeddings) rows.push_back(std::move(e.values));
    std::sort(rows.begin(), rows.end());

    using A = accum_t<T>;
    const std::size_t d = base.spec.embedding_dim;
    std::vector<A> total(d, A(0));
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < d; ++j) total[j] += r[j];
    }
    A sq = 0;
    std::vector<T> mean(d);
    for (std::size_t j = 0; j < d; ++j) {
        const A m = total[j] / A(rows.size());
        mean[j] = static_cast<T>(m);
        sq += m * m;
    }
    if (std::sqrt(sq) < A(kDegenerateImprintEps)) {
        throw DegenerateImprintError("imprinting: mean of the normalized novel embeddings has norm " +
                                     std::to_string(static_cast<double>(std::sqrt(sq))));
    }
    Tape<T> tape;
    tape.set_recording(false);
    const auto unit = tape.l2_normalize(Tensor<T>({d}, std::move(mean)), 0, static_cast<T>(base.spec.norm_eps));
    return {std::vector<T>(unit.data().begin(), unit.data().end()), true};
}

template <typename T>
ModelParams<T> imprint_extend_head(const ModelParams<T>& base, const EmbeddingVector<T>& imprinted,
                                   std::size_t insertion_index) {
    if (base.spec.head_kind != HeadKind::Normalized) {
        throw ContractError("imprinting requires a model with a normalized head");
    }
    const std::size_t d = base.spec.embedding_dim, c = base.spec.num_classes;
    if (insertion_index > c) {
        throw IndexError("imprint: insertion index " + std::to_string(insertion_index) + " exceeds class count " +
                         std::to_string(c));
    }
    if (imprinted.values.size() != d) {
        throw DimensionError("imprint: vector of length " + std::to_string(imprinted.values.size()) +
                             " for embedding width " + std::to_string(d));
    }
    double sq = 0;
    for (T v : imprinted.values) sq += double(v) * double(v);
    if (!imprinted.normalized || std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
        throw ContractError("imprint: imprinted vector must have unit norm");
    }

    ModelParams<T> out = base.clone();
    out.spec.num_classes = c + 1;
    std::vector<T> w((c + 1) * d);
    const auto old = base.head_weight.data();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0, src = 0; j <= c; ++j) {
            w[i * (c + 1) + j] = j == insertion_index ? imprinted.values[i] : old[i * c + src++];
        }
    }
    out.head_weight = Tensor<T>({d, c + 1}, std::move(w), base.head_weight.requires_grad());
    return out;
}

template <typename T>
ModelParams<T> imprint_from_indices(const ModelParams<T>& base, const Dataset& dataset,
                                    std::span<const std::size_t> novel_indices, int novel_class) {
    if (novel_indices.empty()) throw DataError("imprinting needs at least one novel example");
    std::vector<std::size_t> sorted(novel_indices.begin(), novel_indices.end());
    std::sort(sorted.begin(), sorted.end());
    for (auto i : sorted) {
        if (dataset.labels().at(i) != novel_class) {
            throw DataError("imprinting: example " + std::to_string(i) + " is not of the novel class");
        }
    }
    const auto vec = compute_imprinted_vector(base, dataset.gather<T>(sorted));
    return imprint_extend_head(base, vec, static_cast<std::size_t>(novel_class));
}

template <typename T>
ModelParams<T> imprint_pipeline(const ModelParams<T>& base, const Dataset& dataset,
                                std::span<const std::size_t> train_indices, int novel_class, std::size_t n_shots,
                                std::uint64_t seed, std::vector<std::size_t>* chosen) {
    auto subset = select_nshot(train_indices, dataset.labels(), novel_class, n_shots, seed);
    auto out = imprint_from_indices(base, dataset, subset, novel_class);
    if (chosen) *chosen = std::move(subset);
    return out;
}

#define IMPRINT_INSTANTIATE(T)                                                                                 \
    template EmbeddingVector<T> compute_imprinted_vector<T>(const ModelParams<T>&, const Tensor<T>&);         \
    template ModelParams<T> imprint_extend_head<T>(const ModelParams<T>&, const EmbeddingVector<T>&,           \
                                                   std::size_t);                                               \
    template ModelParams<T> imprint_from_indices<T>(const ModelParams<T>&, const Dataset&,                     \
                                                    std::span<const std::size_t>, int);                        \
    template ModelParams<T> imprint_pipeline<T>(const ModelParams<T>&, const Dataset&,                         \
                                                std::span<const std::size_t>, int, std::size_t, std::uint64_t, \
                                                std::vector<std::size_t>*);

IMPRINT_INSTANTIATE(float)
IMPRINT_INSTANTIATE(double)
#undef IMPRINT_INSTANTIATE

}  // namespace imprint
