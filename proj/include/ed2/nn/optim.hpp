#pragma once

#include "ed2/nn/tensor.hpp"

#include <cstdint>
#include <functional>

namespace ed2::nn {

struct AdamState {
    Gradients first_moment;
    Gradients second_moment;
    std::uint64_t step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState init(const ParamSet& params, double learning_rate, double beta1 = 0.9,
                          double beta2 = 0.999, double epsilon = 1e-8);
};

// Bias-corrected Adam. When every gradient entry is exactly zero the moments decay and the
// step counter advances but parameters are left untouched.
// Throws InvalidInput on shape mismatch or bad hyperparameters, NumericalError if an update
// would produce a non-finite parameter.
void adam_step(ParamSet& params, const Gradients& grads, AdamState& state);

// Central differences (f(p + eps) - f(p - eps)) / (2 eps) for every scalar parameter.
Gradients finite_diff_grad(const std::function<double(const ParamSet&)>& f, const ParamSet& params,
                           double eps);

}  // namespace ed2::nn
