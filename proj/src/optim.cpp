#include "imprint/optim.hpp"

#include <cmath>
#include <string>

#include "imprint/error.hpp"

namespace imprint {

double lr_at(const LrSchedule& schedule, int epoch) {
    if (epoch < 0) throw ContractError("lr_at: negative epoch " + std::to_string(epoch));
    const int steps = epoch / schedule.step_size;
    return schedule.base_lr * std::pow(schedule.decay_factor, steps);
}

template <typename T>
void OptimizerState<T>::add(const Tensor<T>& param, T lr_multiplier) {
    if (!(lr_multiplier > T(0))) throw ContractError("lr multiplier must be positive");
    slots.push_back({std::vector<T>(param.numel(), T(0)), lr_multiplier});
}

template <typename T>
void sgd_step(std::span<Tensor<T>> params, OptimizerState<T>& state, T lr) {
    if (!(lr > T(0))) throw ContractError("sgd_step: lr must be positive");
    if (state.slots.size() != params.size()) {
        throw ContractError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                            std::to_string(state.slots.size()) + " velocity buffers");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        auto& slot = state.slots[k];
        if (slot.velocity.size() != p.numel()) {
            throw ContractError("sgd_step: velocity buffer " + std::to_string(k) + " does not match parameter shape " +
                                shape_to_string(p.shape()));
        }
        if (!p.has_grad()) throw ContractError("sgd_step: parameter " + std::to_string(k) + " has no gradient");
        auto data = p.data();
        auto grad = p.grad();
        const T step = slot.lr_multiplier * lr;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const T g = grad[i] + state.weight_decay * data[i];
            slot.velocity[i] = state.momentum * slot.velocity[i] - step * g;
            data[i] += slot.velocity[i];
        }
    }
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void sgd_step<float>(std::span<Tensor<float>>, OptimizerState<float>&, float);
template void sgd_step<double>(std::span<Tensor<double>>, OptimizerState<double>&, double);

}  // namespace imprint
