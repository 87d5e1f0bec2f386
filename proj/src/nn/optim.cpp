#include "ed2/nn/optim.hpp"

#include "ed2/common/errors.hpp"

#include <cmath>
#include <string>

namespace ed2::nn {

AdamState AdamState::init(const ParamSet& params, double learning_rate, double beta1, double beta2,
                          double epsilon) {
    AdamState s;
    s.first_moment = zero_gradients(params);
    s.second_moment = zero_gradients(params);
    s.learning_rate = learning_rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
}

void adam_step(ParamSet& params, const Gradients& grads, AdamState& state) {
    if (!(state.beta1 >= 0.0 && state.beta1 < 1.0 && state.beta2 >= 0.0 && state.beta2 < 1.0)) {
        throw InvalidInput("adam: betas must lie in [0, 1)");
    }
    if (!(state.epsilon > 0.0)) throw InvalidInput("adam: epsilon must be positive");
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw InvalidInput("adam: gradient/moment count does not match parameter count");
    }
    bool all_zero = true;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::size_t n = params[i].size();
        if (grads[i].size() != n || state.first_moment[i].size() != n || state.second_moment[i].size() != n) {
            throw InvalidInput("adam: shape mismatch for tensor '" + params.name(i) + "'");
        }
        for (double g : grads[i]) {
            if (!std::isfinite(g)) throw NumericalError(state.step_count, "adam: non-finite gradient");
            if (g != 0.0) all_zero = false;
        }
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        auto& p = params[i].values;
        const auto& g = grads[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            if (all_zero) continue;
            const double update = state.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.epsilon);
            const double next = p[k] - update;
            if (!std::isfinite(next)) {
                throw NumericalError(state.step_count, "adam: non-finite parameter in '" + params.name(i) + "'");
            }
            p[k] = next;
        }
    }
}

Gradients finite_diff_grad(const std::function<double(const ParamSet&)>& f, const ParamSet& params,
                           double eps) {
    if (!(eps > 0.0)) throw InvalidInput("finite_diff_grad: eps must be positive");
    Gradients out = zero_gradients(params);
    ParamSet probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t k = 0; k < params[i].size(); ++k) {
            const double orig = params[i].values[k];
            probe[i].values[k] = orig + eps;
            const double up = f(probe);
            probe[i].values[k] = orig - eps;
            const double down = f(probe);
            probe[i].values[k] = orig;
            out[i][k] = (up - down) / (2.0 * eps);
        }
    }
    return out;
}

}  // namespace ed2::nn
