#pragma once

// Independent reference computations and fixtures shared by the unit tests
// and the acceptance binary. Oracles here deliberately avoid the library's
// own helpers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "imprint/grad_check.hpp"
#include "imprint/metrics.hpp"
#include "imprint/model.hpp"
#include "imprint/rng.hpp"
#include "imprint/tape.hpp"

namespace imprint::testing {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<T>(u(rng));
    return Tensor<T>(std::move(shape), std::move(data), requires_grad);
}

// Values bounded away from zero, so relu is differentiable at every probe.
inline Tensor<double> away_from_zero(Shape shape, Rng& rng, bool requires_grad = true) {
    std::uniform_real_distribution<double> mag(0.05, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = sign(rng) ? mag(rng) : -mag(rng);
    return Tensor<double>(std::move(shape), std::move(data), requires_grad);
}

inline std::vector<double> normalize_oracle(const std::vector<double>& v) {
    double ss = 0;
    for (double x : v) ss += x * x;
    const double n = std::sqrt(ss);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

// Embedding of one input row computed by hand from the raw weights.
inline std::vector<double> embed_oracle(const ModelParams<double>& p, const std::vector<double>& x) {
    auto dense = [](const Dense<double>& layer, const std::vector<double>& in, bool relu) {
        const std::size_t n_in = layer.weight.rows(), n_out = layer.weight.cols();
        std::vector<double> out(n_out);
        for (std::size_t o = 0; o < n_out; ++o) {
            double s = layer.bias[o];
            for (std::size_t i = 0; i < n_in; ++i) s += in[i] * layer.weight.at(i, o);
            out[o] = relu ? std::max(0.0, s) : s;
        }
        return out;
    };
    std::vector<double> h = x;
    for (const auto& layer : p.hidden) h = dense(layer, h, true);
    return dense(p.embedding, h, false);
}

// normalize(mean(normalize(embed(x_i)))), straight-line.
inline std::vector<double> imprint_oracle(const ModelParams<double>& p, const std::vector<std::vector<double>>& rows) {
    std::vector<double> mean(p.spec.embedding_dim, 0.0);
    for (const auto& r : rows) {
        const auto e = normalize_oracle(embed_oracle(p, r));
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += e[j];
    }
    for (auto& m : mean) m /= static_cast<double>(rows.size());
    return normalize_oracle(mean);
}

// Brute-force metrics from raw (truth, predicted) pairs.
struct RecountMetrics {
    std::vector<std::optional<double>> sensitivity, ppv;
};

inline RecountMetrics recount(const std::vector<int>& truth, const std::vector<int>& predicted, int classes) {
    RecountMetrics m;
    for (int c = 0; c < classes; ++c) {
        long tp = 0, actual = 0, called = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == c) ++actual;
            if (predicted[i] == c) ++called;
            if (truth[i] == c && predicted[i] == c) ++tp;
        }
        m.sensitivity.push_back(actual ? std::optional<double>(double(tp) / double(actual)) : std::nullopt);
        m.ppv.push_back(called ? std::optional<double>(double(tp) / double(called)) : std::nullopt);
    }
    return m;
}

inline std::optional<double> macro_oracle(const std::vector<std::optional<double>>& v) {
    double s = 0;
    int n = 0;
    for (const auto& x : v) {
        if (x) {
            s += *x;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return s / n;
}

struct TwoPass {
    std::optional<double> mean, std;
};

inline TwoPass two_pass(const std::vector<std::optional<double>>& v) {
    std::vector<double> xs;
    for (const auto& x : v) {
        if (x) xs.push_back(*x);
    }
    TwoPass r;
    if (xs.empty()) return r;
    double s = 0;
    for (double x : xs) s += x;
    const double mean = s / double(xs.size());
    r.mean = mean;
    if (xs.size() < 2) return r;
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    r.std = std::sqrt(ss / double(xs.size() - 1));
    return r;
}

// Chi-square critical value for df degrees of freedom at upper-tail
// probability 0.001 (Wilson-Hilferty approximation).
inline double chi_square_999(int df) {
    const double z = 3.090232306167813;
    const double k = df;
    const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
    return k * t * t * t;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("imprint_test_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// One gradient-check case: a scalar function of some inputs.
struct GradCase {
    std::string name;
    std::function<Tensor<double>(Tape<double>&)> fn;
    std::vector<Tensor<double>> inputs;
};

// Small network spec used wherever a full model is needed in double.
inline NetworkSpec tiny_spec(std::size_t classes, HeadKind head) {
    NetworkSpec s;
    s.input_dim = 5;
    s.hidden_dims = {6, 4};
    s.embedding_dim = 7;
    s.num_classes = classes;
    s.head_kind = head;
    return s;
}

// Every differentiable op and both full model losses, drawn from `seed`.
inline std::vector<GradCase> grad_cases(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCase> cases;
    std::uniform_int_distribution<std::size_t> dim(2, 5);

    {
        auto a = random_tensor<double>({dim(rng), dim(rng)}, rng, -1, 1, true);
        auto b = random_tensor<double>({a.cols(), dim(rng)}, rng, -1, 1, true);
        auto w = random_tensor<double>({a.rows(), b.cols()}, rng);
        cases.push_back({"matmul", [a, b, w](Tape<double>& t) { return t.dot(t.matmul(a, b), w); }, {a, b}});
    }
    {
        auto x = random_tensor<double>({dim(rng), dim(rng)}, rng, -1, 1, true);
        auto bias = random_tensor<double>({x.cols()}, rng, -1, 1, true);
        auto w = random_tensor<double>(x.shape(), rng);
        cases.push_back({"add_bias", [x, bias, w](Tape<double>& t) { return t.dot(t.add_bias(x, bias), w); },
                         {x, bias}});
    }
    {
        auto x = away_from_zero({dim(rng), dim(rng)}, rng);
        auto w = random_tensor<double>(x.shape(), rng);
        cases.push_back({"relu", [x, w](Tape<double>& t) { return t.dot(t.relu(x), w); }, {x}});
    }
    for (std::size_t axis : {0, 1}) {
        auto x = random_tensor<double>({dim(rng), dim(rng)}, rng, -1, 1, true);
        auto w = random_tensor<double>(x.shape(), rng);
        cases.push_back({"l2_normalize_axis" + std::to_string(axis),
                         [x, w, axis](Tape<double>& t) { return t.dot(t.l2_normalize(x, axis), w); }, {x}});
    }
    {
        auto x = random_tensor<double>({dim(rng)}, rng, -1, 1, true);
        auto w = random_tensor<double>(x.shape(), rng);
        cases.push_back({"l2_normalize_vector", [x, w](Tape<double>& t) { return t.dot(t.l2_normalize(x, 0), w); },
                         {x}});
    }
    {
        const std::size_t batch = dim(rng), classes = dim(rng);
        auto logits = random_tensor<double>({batch, classes}, rng, -2, 2, true);
        std::uniform_int_distribution<int> lab(0, static_cast<int>(classes) - 1);
        std::vector<int> labels(batch);
        for (auto& l : labels) l = lab(rng);
        cases.push_back({"softmax_cross_entropy",
                         [logits, labels](Tape<double>& t) { return t.softmax_cross_entropy(logits, labels); },
                         {logits}});
    }
    {
        auto x = random_tensor<double>({dim(rng), dim(rng)}, rng, -1, 1, true);
        auto w = random_tensor<double>(x.shape(), rng);
        // scaled so the expected gradient is not all ones
        cases.push_back({"sum", [x, w](Tape<double>& t) { return t.dot(t.sum(x), Tensor<double>::scalar(w[0])); },
                         {x}});
    }
    {
        auto a = random_tensor<double>({dim(rng), dim(rng)}, rng, -1, 1, true);
        auto b = random_tensor<double>(a.shape(), rng, -1, 1, true);
        cases.push_back({"dot", [a, b](Tape<double>& t) { return t.dot(a, b); }, {a, b}});
    }
    for (std::size_t classes : {2, 3}) {
        for (HeadKind head : {HeadKind::Normalized, HeadKind::Joint}) {
            const auto spec = tiny_spec(classes, head);
            Rng init(rng());
            auto params = init_params<double>(spec, init);
            // Zero biases plus a fully dead ReLU layer give a zero embedding,
            // where normalization has no derivative. Keep away from it.
            for (auto& layer : params.hidden) layer.bias = random_tensor<double>(layer.bias.shape(), rng, 0.2, 0.6);
            params.embedding.bias = random_tensor<double>(params.embedding.bias.shape(), rng, -1, 1);
            params.set_requires_grad(true);
            const std::size_t batch = 4;
            auto x = random_tensor<double>({batch, spec.input_dim}, rng, -2, 2);
            std::uniform_int_distribution<int> lab(0, static_cast<int>(classes) - 1);
            std::vector<int> labels(batch);
            for (auto& l : labels) l = lab(rng);
            cases.push_back({"model_loss_" + std::to_string(classes) + "class_" + to_string(head),
                             [params, x, labels](Tape<double>& t) { return loss(params, t, x, labels); },
                             params.tensors()});
        }
    }
    return cases;
}

// Relative-error floor of the gradient suite: coordinates whose derivative
// is below this magnitude are judged by absolute error.
inline constexpr double kGradFloor = 1e-6;

}  // namespace imprint::testing
