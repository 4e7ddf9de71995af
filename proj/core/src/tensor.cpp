#include "dopplerkit/tensor.hpp"

#include <algorithm>

#include "dopplerkit/errors.hpp"

namespace dopplerkit {

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

TensorRef make_tensor(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    const std::size_t n = shape_numel(shape);
    t->shape = std::move(shape);
    t->data.assign(n, 0.0);
    t->requires_grad = requires_grad;  // grad buffer allocated lazily by ensure_grad
    return t;
}

TensorRef make_tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    if (data.size() != n) throw DimensionError("data length does not match shape");
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    return t;
}

TensorRef make_scalar(double value, bool requires_grad) {
    return make_tensor({1}, {value}, requires_grad);
}

void Tape::backward(const TensorRef& loss) {
    if (!loss || loss->numel() != 1) throw ContractError("backward requires a scalar loss");
    for (Node& n : nodes_) {
        n.output->ensure_grad();
        n.output->zero_grad();
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
}

}  // namespace dopplerkit
