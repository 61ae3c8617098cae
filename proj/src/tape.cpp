#include "imprint/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "imprint/error.hpp"

namespace imprint {

namespace {

std::uint64_t next_tape_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<RowMat<T>> as_matrix(std::vector<T>& v, std::size_t rows, std::size_t cols) {
    return {v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <typename T>
Eigen::Map<const RowMat<T>> as_matrix(const std::vector<T>& v, std::size_t rows, std::size_t cols) {
    return {v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

// Layout of the slices l2_normalize operates on.
struct SliceLayout {
    std::size_t count;   // number of slices
    std::size_t length;  // elements per slice
    std::size_t outer;   // offset between consecutive slices
    std::size_t inner;   // offset between consecutive elements of a slice
};

SliceLayout slice_layout(const Shape& shape, std::size_t axis) {
    if (shape.size() == 1 && axis == 0) return {1, shape[0], 0, 1};
    if (shape.size() == 2 && axis == 1) return {shape[0], shape[1], shape[1], 1};
    if (shape.size() == 2 && axis == 0) return {shape[1], shape[0], 1, shape[1]};
    throw DimensionError("l2_normalize: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_to_string(shape));
}

}  // namespace

template <typename T>
Tape<T>::Tape() : id_(next_tape_id()) {}

template <typename T>
void Tape<T>::clear() {
    records_.clear();
}

template <typename T>
bool Tape<T>::wants_grad(std::initializer_list<const Tensor<T>*> inputs) const {
    if (!recording_) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
Tensor<T> Tape<T>::make_output(Shape shape, std::vector<T> data, bool tracked) {
    return Tensor<T>(std::move(shape), std::move(data), tracked);
}

template <typename T>
void Tape<T>::push(const Tensor<T>& output, std::function<void()> backward) {
    output.impl_->tape_id = id_;
    output.impl_->record = records_.size();
    records_.push_back({output.impl_, std::move(backward)});
}

template <typename T>
Tensor<T> Tape<T>::matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + shape_to_string(a.shape()) + " by " +
                             shape_to_string(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<T> out(m * n);
    as_matrix(out, m, n).noalias() = as_matrix(a.impl_->data, m, k) * as_matrix(b.impl_->data, k, n);

    const bool tracked = wants_grad({&a, &b});
    auto result = make_output({m, n}, std::move(out), tracked);
    if (tracked) {
        auto ai = a.impl_, bi = b.impl_, ci = result.impl_;
        push(result, [ai, bi, ci, m, k, n] {
            const auto dc = as_matrix(std::as_const(ci->grad), m, n);
            if (ai->requires_grad) {
                as_matrix(ai->grad, m, k).noalias() += dc * as_matrix(std::as_const(bi->data), k, n).transpose();
            }
            if (bi->requires_grad) {
                as_matrix(bi->grad, k, n).noalias() += as_matrix(std::as_const(ai->data), m, k).transpose() * dc;
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> Tape<T>::add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
    if (x.rank() != 2 || bias.numel() != x.cols()) {
        throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) + " does not fit " +
                             shape_to_string(x.shape()));
    }
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<T> out(x.impl_->data);
    const auto& b = bias.impl_->data;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
    }

    const bool tracked = wants_grad({&x, &bias});
    auto result = make_output({m, n}, std::move(out), tracked);
    if (tracked) {
        auto xi = x.impl_, bi = bias.impl_, yi = result.impl_;
        push(result, [xi, bi, yi, m, n] {
            const auto& g = yi->grad;
            if (xi->requires_grad) {
                for (std::size_t i = 0; i < m * n; ++i) xi->grad[i] += g[i];
            }
            if (bi->requires_grad) {
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) bi->grad[j] += g[i * n + j];
                }
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> Tape<T>::relu(const Tensor<T>& x) {
    std::vector<T> out(x.numel());
    const auto& in = x.impl_->data;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);

    const bool tracked = wants_grad({&x});
    auto result = make_output(x.shape(), std::move(out), tracked);
    if (tracked) {
        auto xi = x.impl_, yi = result.impl_;
        push(result, [xi, yi] {
            for (std::size_t i = 0; i < xi->data.size(); ++i) {
                if (xi->data[i] > T(0)) xi->grad[i] += yi->grad[i];
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> Tape<T>::l2_normalize(const Tensor<T>& x, std::size_t axis, T eps) {
    if (!(eps > T(0))) throw ContractError("l2_normalize: eps must be positive");
    using A = accum_t<T>;
    const auto layout = slice_layout(x.shape(), axis);
    const auto& in = x.impl_->data;
    std::vector<T> out(in.size());
    // Per-slice divisor; zero marks the eps branch.
    std::vector<A> norms(layout.count);

    for (std::size_t s = 0; s < layout.count; ++s) {
        const std::size_t base = s * layout.outer;
        A sq = 0;
        for (std::size_t e = 0; e < layout.length; ++e) {
            const A v = in[base + e * layout.inner];
            sq += v * v;
        }
        const A norm = std::sqrt(sq);
        if (norm < A(eps)) {
            norms[s] = 0;
            for (std::size_t e = 0; e < layout.length; ++e) {
                const std::size_t i = base + e * layout.inner;
                out[i] = static_cast<T>(A(in[i]) / A(eps));
            }
        } else if (std::abs(norm - A(1)) <= A(std::numeric_limits<T>::epsilon())) {
            norms[s] = norm;
            for (std::size_t e = 0; e < layout.length; ++e) {
                const std::size_t i = base + e * layout.inner;
                out[i] = in[i];
            }
        } else {
            norms[s] = norm;
            for (std::size_t e = 0; e < layout.length; ++e) {
                const std::size_t i = base + e * layout.inner;
                out[i] = static_cast<T>(A(in[i]) / norm);
            }
        }
    }

    const bool tracked = wants_grad({&x});
    auto result = make_output(x.shape(), std::move(out), tracked);
    if (tracked) {
        auto xi = x.impl_, yi = result.impl_;
        push(result, [xi, yi, layout, norms = std::move(norms)] {
            const auto& u = yi->data;
            const auto& g = yi->grad;
            for (std::size_t s = 0; s < layout.count; ++s) {
                const std::size_t base = s * layout.outer;
                if (norms[s] == A(0)) {
                    for (std::size_t e = 0; e < layout.length; ++e) {
                        const std::size_t i = base + e * layout.inner;
                        xi->grad[i] += g[i];
                    }
                    continue;
                }
                // (I - u u^T) g / ||v||
                A ug = 0;
                for (std::size_t e = 0; e < layout.length; ++e) {
                    const std::size_t i = base + e * layout.inner;
                    ug += A(u[i]) * A(g[i]);
                }
                for (std::size_t e = 0; e < layout.length; ++e) {
                    const std::size_t i = base + e * layout.inner;
                    xi->grad[i] += static_cast<T>((A(g[i]) - A(u[i]) * ug) / norms[s]);
                }
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> Tape<T>::softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
    using A = accum_t<T>;
    const std::size_t batch = logits.rows(), classes = logits.cols();
    if (labels.size() != batch) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                             shape_to_string(logits.shape()));
    }
    const auto& z = logits.impl_->data;
    std::vector<T> probs(z.size());
    A total = 0;
    for (std::size_t i = 0; i < batch; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw IndexError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(classes) + ")");
        }
        const T* row = &z[i * classes];
        const A shift = *std::max_element(row, row + classes);
        A denom = 0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(A(row[c]) - shift);
        const A log_denom = std::log(denom);
        for (std::size_t c = 0; c < classes; ++c) {
            probs[i * classes + c] = static_cast<T>(std::exp(A(row[c]) - shift - log_denom));
        }
        total += log_denom + shift - A(row[y]);
    }
    const A mean = total / A(batch);

    const bool tracked = wants_grad({&logits});
    auto result = make_output({1}, {static_cast<T>(mean)}, tracked);
    if (tracked) {
        auto zi = logits.impl_, li = result.impl_;
        std::vector<int> ys(labels.begin(), labels.end());
        push(result, [zi, li, probs = std::move(probs), ys = std::move(ys), batch, classes] {
            const T scale = li->grad[0] / static_cast<T>(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                for (std::size_t c = 0; c < classes; ++c) {
                    const T onehot = static_cast<std::size_t>(ys[i]) == c ? T(1) : T(0);
                    zi->grad[i * classes + c] += scale * (probs[i * classes + c] - onehot);
                }
            }
        });
    }
    return result;
}

template <typename T>
Tensor<T> Tape<T>::sum(const Tensor<T>& x) {
    accum_t<T> total = 0;
    for (T v : x.impl_->data) total += v;

    const bool tracked = wants_grad({&x});
    auto result = make_output({1}, {static_cast<T>(total)}, tracked);
    if (tracked) {
        auto xi = x.impl_, yi = result.impl_;
        push(result, [xi, yi] {
            const T g = yi->grad[0];
            for (auto& d : xi->grad) d += g;
        });
    }
    return result;
}

template <typename T>
Tensor<T> Tape<T>::dot(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("dot: shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()) +
                             " differ");
    }
    accum_t<T> total = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) total += accum_t<T>(a.impl_->data[i]) * b.impl_->data[i];

    const bool tracked = wants_grad({&a, &b});
    auto result = make_output({1}, {static_cast<T>(total)}, tracked);
    if (tracked) {
        auto ai = a.impl_, bi = b.impl_, yi = result.impl_;
        push(result, [ai, bi, yi] {
            const T g = yi->grad[0];
            if (ai->requires_grad) {
                for (std::size_t i = 0; i < ai->data.size(); ++i) ai->grad[i] += g * bi->data[i];
            }
            if (bi->requires_grad) {
                for (std::size_t i = 0; i < bi->data.size(); ++i) bi->grad[i] += g * ai->data[i];
            }
        });
    }
    return result;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " + shape_to_string(loss.shape()));
    }
    const auto& impl = loss.impl_;
    if (impl->tape_id != id_ || impl->record >= records_.size() || records_[impl->record].output != impl) {
        throw ContractError("backward: loss was not recorded on this tape");
    }
    impl->grad[0] = T(1);
    for (std::size_t i = impl->record + 1; i-- > 0;) {
        records_[i].backward();
    }
    clear();
}

template class Tape<float>;
template class Tape<double>;

}  // namespace imprint
