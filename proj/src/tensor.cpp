#include "imprint/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "imprint/error.hpp"

namespace imprint {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

template <typename T>
Tensor<T>::Tensor() : impl_(std::make_shared<Impl>()) {
    impl_->shape = {0};
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor shape " + shape_to_string(shape) + " has a zero dimension");
    }
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("tensor shape " + shape_to_string(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    set_requires_grad(requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

template <typename T>
std::size_t Tensor<T>::rows() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_to_string(shape()));
    return impl_->shape[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_to_string(shape()));
    return impl_->shape[1];
}

template <typename T>
T& Tensor<T>::at(std::size_t r, std::size_t c) {
    return impl_->data[r * cols() + c];
}

template <typename T>
const T& Tensor<T>::at(std::size_t r, std::size_t c) const {
    return impl_->data[r * cols() + c];
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) throw ContractError("item() on a tensor of shape " + shape_to_string(shape()));
    return impl_->data[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    if (on) {
        impl_->grad.assign(impl_->data.size(), T(0));
    } else {
        impl_->grad.clear();
    }
}

template <typename T>
void Tensor<T>::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
    auto impl = std::make_shared<Impl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    impl->grad = impl_->grad;
    impl->requires_grad = impl_->requires_grad;
    return Tensor(std::move(impl));
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace imprint
