#pragma once

#include <vector>

#include "dopplerkit/tensor.hpp"

namespace dopplerkit {

/// Bias-corrected Adam state for one parameter tensor.
struct AdamState {
    std::vector<double> m;  // first moment, same size as the parameter
    std::vector<double> v;  // second moment
    long t = 0;             // step counter, incremented once per step
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(std::size_t n, double lr = 1e-3, double beta1 = 0.9,
                          double beta2 = 0.999, double eps = 1e-8);

/// In-place update of `param` from `grad`. Standard bias-corrected rule:
///   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
///   param -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(std::vector<double>& param, const std::vector<double>& grad, AdamState& state);

/// Convenience overload for tape tensors: updates tensor->data from tensor->grad.
void adam_step(const TensorRef& param, AdamState& state);

}  // namespace dopplerkit
