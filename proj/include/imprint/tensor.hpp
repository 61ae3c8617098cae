#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace imprint {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Accumulator type used for reductions (norms, sums) over T.
template <typename T>
struct Accumulator;
template <>
struct Accumulator<float> {
    using type = double;
};
template <>
struct Accumulator<double> {
    using type = long double;
};
template <typename T>
using accum_t = typename Accumulator<T>::type;

template <typename T>
class Tape;

/// Dense row-major array with an optional gradient buffer.
///
/// Tensor is a handle: copies share the same storage, which is what lets a
/// tape write gradients back into parameters owned elsewhere. Use clone()
/// for an independent deep copy.
template <typename T>
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }
    /// Rows/cols of a rank-2 tensor.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<T> data() { return impl_->data; }
    std::span<const T> data() const { return impl_->data; }
    T& operator[](std::size_t i) { return impl_->data[i]; }
    const T& operator[](std::size_t i) const { return impl_->data[i]; }
    T& at(std::size_t r, std::size_t c);
    const T& at(std::size_t r, std::size_t c) const;
    T item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    /// Enabling allocates a zeroed gradient buffer; disabling drops it.
    void set_requires_grad(bool on);
    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<T> grad() { return impl_->grad; }
    std::span<const T> grad() const { return impl_->grad; }
    void zero_grad();

    Tensor clone() const;
    bool shares_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;
        bool requires_grad = false;
        std::uint64_t tape_id = 0;  // tape that produced this tensor, 0 for leaves
        std::size_t record = 0;     // index of the producing record on that tape
    };

    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

    std::shared_ptr<Impl> impl_;

    friend class Tape<T>;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace imprint
