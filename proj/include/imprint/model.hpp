#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imprint/rng.hpp"
#include "imprint/tape.hpp"
#include "imprint/tensor.hpp"

namespace imprint {

enum class HeadKind {
    /// Cosine classifier: unit embedding against unit weight columns, no bias,
    /// no scale factor. Logits lie in [-1, 1].
    Normalized,
    /// Plain affine softmax layer with no normalization constraints.
    Joint,
};

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

struct NetworkSpec {
    std::size_t input_dim = 32;
    std::vector<std::size_t> hidden_dims{64, 64};
    std::size_t embedding_dim = 256;
    std::size_t num_classes = 2;
    HeadKind head_kind = HeadKind::Normalized;
    /// Joint head only.
    bool joint_bias = true;
    double norm_eps = kDefaultNormEps;

    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

/// Which part of the network a parameter tensor belongs to.
enum class ParamRole { Extractor, Embedding, Head };

/// Fully connected layer computing x * weight + bias, weight [in x out].
template <typename T>
struct Dense {
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
struct ModelParams {
    NetworkSpec spec;
    std::vector<Dense<T>> hidden;
    Dense<T> embedding;
    /// [embedding_dim x num_classes], one column per class.
    Tensor<T> head_weight;
    /// Present only for a Joint head with joint_bias set.
    std::optional<Tensor<T>> head_bias;

    /// Parameter tensors in a fixed order: hidden layers (weight, bias)...,
    /// embedding (weight, bias), head weight, head bias.
    std::vector<Tensor<T>> tensors() const;
    std::vector<std::string> names() const;
    std::vector<ParamRole> roles() const;

    ModelParams clone() const;
    template <typename U>
    ModelParams<U> cast() const;

    void set_requires_grad(bool on);
    void zero_grad();
};

/// One embedding; `normalized` records whether values have unit norm.
template <typename T>
struct EmbeddingVector {
    std::vector<T> values;
    bool normalized = false;
};

template <typename T>
ModelParams<T> init_params(const NetworkSpec& spec, Rng& rng);

/// Extractor hidden layers with ReLU, then the linear embedding layer.
/// Returns the pre-normalization embeddings, [batch x embedding_dim].
template <typename T>
Tensor<T> forward_embed(const ModelParams<T>& params, Tape<T>& tape, const Tensor<T>& x);

/// Classifier head applied to embeddings (normalizing them first for the
/// Normalized head).
template <typename T>
Tensor<T> head_logits(const ModelParams<T>& params, Tape<T>& tape, const Tensor<T>& embeddings);

template <typename T>
Tensor<T> forward_logits(const ModelParams<T>& params, Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> loss(const ModelParams<T>& params, Tape<T>& tape, const Tensor<T>& x, std::span<const int> labels);

/// Argmax with ties going to the lowest index.
template <typename T>
int predict(std::span<const T> logits_row);

template <typename T>
std::vector<int> predict_batch(const Tensor<T>& logits);

/// Embeddings for a batch without recording, optionally L2-normalized.
template <typename T>
std::vector<EmbeddingVector<T>> embed_batch(const ModelParams<T>& params, const Tensor<T>& x, bool normalize);

}  // namespace imprint
