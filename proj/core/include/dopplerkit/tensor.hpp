#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace dopplerkit {

/// Dense N-dimensional 64-bit float array, row-major. Tensors are immutable
/// after the forward op that created them; only the grad buffer mutates.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // same size as data when requires_grad, else empty
    bool requires_grad = false;

    std::size_t numel() const { return data.size(); }

    /// Flat index for a 4-D (N,C,H,W) tensor.
    std::size_t at(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w;
    }

    void ensure_grad();
    void zero_grad();
};

using TensorRef = std::shared_ptr<Tensor>;

std::size_t shape_numel(const std::vector<int>& shape);

TensorRef make_tensor(std::vector<int> shape, bool requires_grad = false);
TensorRef make_tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);
inline TensorRef make_tensor(std::vector<int> shape, std::initializer_list<double> data,
                             bool requires_grad = false) {
    return make_tensor(std::move(shape), std::vector<double>(data), requires_grad);
}
TensorRef make_scalar(double value, bool requires_grad = false);

/// Ordered record of the operations of one forward pass. Operations append
/// their backward rules as they execute, so the list is topologically ordered
/// by construction; backward() replays it once in reverse.
class Tape {
  public:
    /// Appended by ops; fn propagates the output's grads to the input grads.
    void record(std::function<void()> fn, TensorRef output) {
        nodes_.push_back({std::move(fn), std::move(output)});
    }

    /// Seeds d(loss)/d(loss) = 1 and replays the backward rules in reverse,
    /// visiting each node exactly once. Grads of op outputs are pass-local
    /// (reset on every call); grads of leaf tensors accumulate across calls.
    /// Throws ContractError unless loss is a scalar.
    void backward(const TensorRef& loss);

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    struct Node {
        std::function<void()> fn;
        TensorRef output;
    };
    std::vector<Node> nodes_;
};

}  // namespace dopplerkit
