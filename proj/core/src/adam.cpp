#include "dopplerkit/adam.hpp"

#include <cmath>

#include "dopplerkit/errors.hpp"

namespace dopplerkit {

AdamState make_adam_state(std::size_t n, double lr, double beta1, double beta2, double eps) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    return s;
}

void adam_step(std::vector<double>& param, const std::vector<double>& grad, AdamState& state) {
    if (param.size() != grad.size() || param.size() != state.m.size())
        throw DimensionError("adam_step: parameter, gradient, and state sizes must match");
    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        param[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

void adam_step(const TensorRef& param, AdamState& state) {
    param->ensure_grad();
    adam_step(param->data, param->grad, state);
}

}  // namespace dopplerkit
