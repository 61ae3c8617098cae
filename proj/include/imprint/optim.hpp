#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imprint/tensor.hpp"

namespace imprint {

/// Exponential step decay: base_lr * decay_factor^floor(epoch / step_size).
struct LrSchedule {
    double base_lr = 1e-3;
    int step_size = 4;
    double decay_factor = 0.94;
};

double lr_at(const LrSchedule& schedule, int epoch);

/// Momentum buffers and per-parameter learning-rate multipliers for SGD.
template <typename T>
struct OptimizerState {
    struct Slot {
        std::vector<T> velocity;
        T lr_multiplier = T(1);
    };

    T momentum = T(0.9);
    T weight_decay = T(1e-4);
    std::vector<Slot> slots;

    /// Adds a zero velocity buffer for one parameter.
    void add(const Tensor<T>& param, T lr_multiplier = T(1));
};

/// One SGD step over params, using the gradients they carry:
///   g' = g + weight_decay * p
///   v  = momentum * v - multiplier * lr * g'
///   p  = p + v
/// Slot i of `state` belongs to params[i].
template <typename T>
void sgd_step(std::span<Tensor<T>> params, OptimizerState<T>& state, T lr);

extern template struct OptimizerState<float>;
extern template struct OptimizerState<double>;
extern template void sgd_step<float>(std::span<Tensor<float>>, OptimizerState<float>&, float);
extern template void sgd_step<double>(std::span<Tensor<double>>, OptimizerState<double>&, double);

}  // namespace imprint
