#include "imprint/model.hpp"

#include <cmath>

#include "imprint/error.hpp"

namespace imprint {

std::string to_string(HeadKind kind) {
    return kind == HeadKind::Normalized ? "normalized" : "joint";
}

HeadKind head_kind_from_string(const std::string& name) {
    if (name == "normalized") return HeadKind::Normalized;
    if (name == "joint") return HeadKind::Joint;
    throw ContractError("unknown head kind '" + name + "'");
}

void NetworkSpec::validate() const {
    if (input_dim < 1) throw ContractError("network: input_dim must be >= 1");
    for (auto h : hidden_dims) {
        if (h < 1) throw ContractError("network: hidden layer widths must be >= 1");
    }
    if (embedding_dim < 1) throw ContractError("network: embedding_dim must be >= 1");
    if (num_classes < 2) throw ContractError("network: num_classes must be >= 2");
    if (!(norm_eps > 0)) throw ContractError("network: norm_eps must be positive");
}

template <typename T>
std::vector<Tensor<T>> ModelParams<T>::tensors() const {
    std::vector<Tensor<T>> out;
    for (const auto& layer : hidden) {
        out.push_back(layer.weight);
        out.push_back(layer.bias);
    }
    out.push_back(embedding.weight);
    out.push_back(embedding.bias);
    out.push_back(head_weight);
    if (head_bias) out.push_back(*head_bias);
    return out;
}

template <typename T>
std::vector<std::string> ModelParams<T>::names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        out.push_back("hidden" + std::to_string(i) + ".weight");
        out.push_back("hidden" + std::to_string(i) + ".bias");
    }
    out.push_back("embedding.weight");
    out.push_back("embedding.bias");
    out.push_back("head.weight");
    if (head_bias) out.push_back("head.bias");
    return out;
}

template <typename T>
std::vector<ParamRole> ModelParams<T>::roles() const {
    std::vector<ParamRole> out(2 * hidden.size(), ParamRole::Extractor);
    out.push_back(ParamRole::Embedding);
    out.push_back(ParamRole::Embedding);
    out.push_back(ParamRole::Head);
    if (head_bias) out.push_back(ParamRole::Head);
    return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
    ModelParams out;
    out.spec = spec;
    for (const auto& layer : hidden) out.hidden.push_back({layer.weight.clone(), layer.bias.clone()});
    out.embedding = {embedding.weight.clone(), embedding.bias.clone()};
    out.head_weight = head_weight.clone();
    if (head_bias) out.head_bias = head_bias->clone();
    return out;
}

namespace {

template <typename U, typename T>
Tensor<U> cast_tensor(const Tensor<T>& t) {
    std::vector<U> data(t.data().begin(), t.data().end());
    return Tensor<U>(t.shape(), std::move(data), t.requires_grad());
}

}  // namespace

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
    ModelParams<U> out;
    out.spec = spec;
    for (const auto& layer : hidden) {
        out.hidden.push_back({cast_tensor<U>(layer.weight), cast_tensor<U>(layer.bias)});
    }
    out.embedding = {cast_tensor<U>(embedding.weight), cast_tensor<U>(embedding.bias)};
    out.head_weight = cast_tensor<U>(head_weight);
    if (head_bias) out.head_bias = cast_tensor<U>(*head_bias);
    return out;
}

template <typename T>
void ModelParams<T>::set_requires_grad(bool on) {
    for (auto t : tensors()) t.set_requires_grad(on);
}

template <typename T>
void ModelParams<T>::zero_grad() {
    for (auto t : tensors()) t.zero_grad();
}

namespace {

// Uniform(-bound, bound) weights drawn in double so that float and double
// models built from the same seed agree up to rounding.
template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<T>(dist(rng));
    return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const NetworkSpec& spec, Rng& rng) {
    spec.validate();
    ModelParams<T> params;
    params.spec = spec;

    // He-uniform for layers feeding a ReLU, variance-preserving for the
    // linear embedding and head.
    std::size_t fan_in = spec.input_dim;
    for (auto width : spec.hidden_dims) {
        params.hidden.push_back({uniform_tensor<T>({fan_in, width}, std::sqrt(6.0 / double(fan_in)), rng),
                                 Tensor<T>::zeros({width})});
        fan_in = width;
    }
    params.embedding = {uniform_tensor<T>({fan_in, spec.embedding_dim}, std::sqrt(3.0 / double(fan_in)), rng),
                        Tensor<T>::zeros({spec.embedding_dim})};

    const std::size_t d = spec.embedding_dim, c = spec.num_classes;
    std::uniform_real_distribution<double> dist(-std::sqrt(3.0 / double(d)), std::sqrt(3.0 / double(d)));
    std::vector<double> w(d * c);
    for (auto& v : w) v = dist(rng);
    if (spec.head_kind == HeadKind::Normalized) {
        for (std::size_t j = 0; j < c; ++j) {
            double sq = 0;
            for (std::size_t i = 0; i < d; ++i) sq += w[i * c + j] * w[i * c + j];
            const double norm = std::sqrt(sq);
            for (std::size_t i = 0; i < d; ++i) w[i * c + j] /= norm;
        }
    }
    params.head_weight = Tensor<T>({d, c}, std::vector<T>(w.begin(), w.end()));
    if (spec.head_kind == HeadKind::Joint && spec.joint_bias) params.head_bias = Tensor<T>::zeros({c});
    return params;
}

template <typename T>
Tensor<T> forward_embed(const ModelParams<T>& params, Tape<T>& tape, const Tensor<T>& x) {
    if (x.rank() != 2 || x.cols() != params.spec.input_dim) {
        throw DimensionError("forward: input " + shape_to_string(x.shape()) + " does not have " +
                             std::to_string(params.spec.input_dim) + " columns");
    }
    Tensor<T> h = x;
    for (const auto& layer : params.hidden) {
        h = tape.relu(tape.add_bias(tape.matmul(h, layer.weight), layer.bias));
    }
    return tape.add_bias(tape.matmul(h, params.embedding.weight), params.embedding.bias);
}

template <typename T>
Tensor<T> head_logits(const ModelParams<T>& params, Tape<T>& tape, const Tensor<T>& embeddings) {
    if (embeddings.rank() != 2 || embeddings.cols() != params.spec.embedding_dim) {
        throw DimensionError("head: embeddings " + shape_to_string(embeddings.shape()) + " do not have " +
                             std::to_string(params.spec.embedding_dim) + " columns");
    }
    if (params.spec.head_kind == HeadKind::Normalized) {
        const T eps = static_cast<T>(params.spec.norm_eps);
        const auto unit_embeddings = tape.l2_normalize(embeddings, 1, eps);
        const auto unit_columns = tape.l2_normalize(params.head_weight, 0, eps);
        return tape.matmul(unit_embeddings, unit_columns);
    }
    auto logits = tape.matmul(embeddings, params.head_weight);
    if (params.head_bias) logits = tape.add_bias(logits, *params.head_bias);
    return logits;
}

template <typename T>
Tensor<T> forward_logits(const ModelParams<T>& params, Tape<T>& tape, const Tensor<T>& x) {
    return head_logits(params, tape, forward_embed(params, tape, x));
}

template <typename T>
Tensor<T> loss(const ModelParams<T>& params, Tape<T>& tape, const Tensor<T>& x, std::span<const int> labels) {
    return tape.softmax_cross_entropy(forward_logits(params, tape, x), labels);
}

template <typename T>
int predict(std::span<const T> logits_row) {
    if (logits_row.empty()) throw ContractError("predict: empty logits row");
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits_row.size(); ++c) {
        if (logits_row[c] > logits_row[best]) best = c;
    }
    return static_cast<int>(best);
}

template <typename T>
std::vector<int> predict_batch(const Tensor<T>& logits) {
    const std::size_t n = logits.rows(), c = logits.cols();
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = predict<T>(logits.data().subspan(i * c, c));
    return out;
}

template <typename T>
std::vector<EmbeddingVector<T>> embed_batch(const ModelParams<T>& params, const Tensor<T>& x, bool normalize) {
    Tape<T> tape;
    tape.set_recording(false);
    auto e = forward_embed(params, tape, x);
    if (normalize) e = tape.l2_normalize(e, 1, static_cast<T>(params.spec.norm_eps));
    const std::size_t n = e.rows(), d = e.cols();
    std::vector<EmbeddingVector<T>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = e.data().subspan(i * d, d);
        out[i] = {std::vector<T>(row.begin(), row.end()), normalize};
    }
    return out;
}

#define IMPRINT_INSTANTIATE(T)                                                                         \
    template struct ModelParams<T>;                                                                    \
    template ModelParams<T> init_params<T>(const NetworkSpec&, Rng&);                                  \
    template Tensor<T> forward_embed<T>(const ModelParams<T>&, Tape<T>&, const Tensor<T>&);            \
    template Tensor<T> head_logits<T>(const ModelParams<T>&, Tape<T>&, const Tensor<T>&);              \
    template Tensor<T> forward_logits<T>(const ModelParams<T>&, Tape<T>&, const Tensor<T>&);           \
    template Tensor<T> loss<T>(const ModelParams<T>&, Tape<T>&, const Tensor<T>&, std::span<const int>); \
    template int predict<T>(std::span<const T>);                                                       \
    template std::vector<int> predict_batch<T>(const Tensor<T>&);                                      \
    template std::vector<EmbeddingVector<T>> embed_batch<T>(const ModelParams<T>&, const Tensor<T>&, bool);

IMPRINT_INSTANTIATE(float)
IMPRINT_INSTANTIATE(double)
#undef IMPRINT_INSTANTIATE

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

}  // namespace imprint
