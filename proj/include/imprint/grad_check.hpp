#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "imprint/error.hpp"
#include "imprint/tape.hpp"

namespace imprint {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates = 0;
};

/// Relative error with a floor on the denominator, so that coordinates whose
/// true derivative is zero are judged by absolute error instead.
inline double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

/// Compares tape gradients of a scalar function against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate over every
/// tensor in `inputs`. `fn` reads the inputs and returns the scalar loss.
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(Tape<T>&)>& fn, std::span<Tensor<T>> inputs,
                           T eps = T(1e-5), double floor = 1e-6) {
    for (auto& x : inputs) {
        if (!x.requires_grad()) throw ContractError("grad_check: every input must require a gradient");
        x.zero_grad();
    }
    {
        Tape<T> tape;
        tape.backward(fn(tape));
    }

    GradCheckResult result;
    Tape<T> probe;
    probe.set_recording(false);
    auto eval = [&] { return static_cast<double>(fn(probe).item()); };

    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto data = inputs[k].data();
        const std::vector<T> analytic(inputs[k].grad().begin(), inputs[k].grad().end());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const T saved = data[i];
            data[i] = saved + eps;
            const double up = eval();
            data[i] = saved - eps;
            const double down = eval();
            data[i] = saved;
            const double numeric = (up - down) / (2.0 * static_cast<double>(eps));
            const double err = relative_error(analytic[i], numeric, floor);
            ++result.coordinates;
            if (err > result.max_rel_error || result.coordinates == 1) {
                result.max_rel_error = err;
                result.worst_input = k;
                result.worst_index = i;
                result.analytic = analytic[i];
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace imprint
