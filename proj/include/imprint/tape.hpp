#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "imprint/tensor.hpp"

namespace imprint {

/// Default guard for l2_normalize.
inline constexpr double kDefaultNormEps = 1e-12;

/// Reverse-mode gradient tape.
///
/// Every differentiable operation is a member of the tape that executes it.
/// An operation is recorded only when recording is enabled and at least one
/// input requires a gradient; its output then carries a zeroed gradient
/// buffer. backward() walks the records once, newest first, accumulating
/// into input gradients, and then clears the tape.
///
/// A tape is single-threaded. Independent training runs own separate tapes.
template <typename T>
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// [m x k] * [k x n] -> [m x n].
    Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

    /// Adds a length-n bias to every row of an [m x n] matrix.
    Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

    Tensor<T> relu(const Tensor<T>& x);

    /// Divides each slice along `axis` by max(norm, eps). For a matrix,
    /// axis 1 normalizes rows and axis 0 normalizes columns; a vector only
    /// has axis 0.
    ///
    /// A slice whose norm already equals 1 to within one machine epsilon is
    /// passed through unchanged, which makes normalization exactly
    /// idempotent. Slices shorter than eps are scaled by 1/eps and get a
    /// pass-through gradient.
    Tensor<T> l2_normalize(const Tensor<T>& x, std::size_t axis, T eps = T(kDefaultNormEps));

    /// Mean over the batch of -log softmax(logits)[label], shifted by the
    /// row maximum for stability.
    Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

    /// Sum of all elements, as a scalar tensor.
    Tensor<T> sum(const Tensor<T>& x);

    /// Full contraction of two same-shaped tensors, as a scalar tensor.
    Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b);

    void backward(const Tensor<T>& loss);

    void set_recording(bool on) { recording_ = on; }
    bool recording() const { return recording_; }
    std::size_t size() const { return records_.size(); }
    void clear();

private:
    using Impl = typename Tensor<T>::Impl;

    struct Record {
        std::shared_ptr<Impl> output;
        std::function<void()> backward;
    };

    bool wants_grad(std::initializer_list<const Tensor<T>*> inputs) const;
    Tensor<T> make_output(Shape shape, std::vector<T> data, bool tracked);
    void push(const Tensor<T>& output, std::function<void()> backward);

    std::uint64_t id_;
    bool recording_ = true;
    std::vector<Record> records_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace imprint
