#pragma once

#include <vector>

#include "dopplerkit/tensor.hpp"

namespace dopplerkit {

// Differentiable layer vocabulary. Every op runs eagerly on 4-D (N,C,H,W)
// tensors unless noted; passing tape == nullptr (or inputs that do not
// require grad) skips recording and runs pure inference.

/// Zero-padded 2-D convolution, x: N x C x H x W, w: O x C x k x k, b: O.
/// Output N x O x H' x W' with H' = (H + 2p - k) / stride + 1.
TensorRef conv2d(Tape* tape, const TensorRef& x, const TensorRef& w, const TensorRef& b,
                 int stride = 1, int padding = 0);

/// Anti-aliased downsampling: depthwise normalized binomial k x k blur with
/// reflect padding, then subsampling by `stride`. The kernel is fixed
/// (non-learnable); gradient flows through to x. Output ceil(H/s) x ceil(W/s).
TensorRef blur_pool(Tape* tape, const TensorRef& x, int k, int stride);

/// Normalized 1-D binomial row of length k (odd), sums to exactly 1.
std::vector<double> binomial_kernel(int k);

/// Window max; backward routes to the argmax, first in row-major order on ties.
TensorRef max_pool(Tape* tape, const TensorRef& x, int window, int stride);

/// Each pixel replicated into a 2x2 block; backward sums the four gradients.
TensorRef upsample_nearest2x(Tape* tape, const TensorRef& x);

/// Per-channel spatial mean, N x C x H x W -> N x C x 1 x 1.
TensorRef global_avg_pool(Tape* tape, const TensorRef& x);

TensorRef relu(Tape* tape, const TensorRef& x);

TensorRef sigmoid(Tape* tape, const TensorRef& x);

/// Elementwise sum. b may also be N x C x 1 x 1 against a N x C x H x W,
/// broadcast over the spatial axes.
TensorRef add(Tape* tape, const TensorRef& a, const TensorRef& b);

/// Stack along the channel axis; N, H, W must match.
TensorRef concat_channels(Tape* tape, const TensorRef& a, const TensorRef& b);

/// Mean of -log softmax(logits)[target] over positions whose target is not
/// ignore_index. Class axis is axis 1; targets are flattened row-major over
/// the remaining axes. Stabilized by max subtraction.
TensorRef cross_entropy(Tape* tape, const TensorRef& logits, const std::vector<int>& targets,
                        int ignore_index = -1);

TensorRef sum(Tape* tape, const TensorRef& x);

/// Elementwise product; same N x C x 1 x 1 broadcast rule as add().
TensorRef mul(Tape* tape, const TensorRef& a, const TensorRef& b);
TensorRef scale(Tape* tape, const TensorRef& x, double c);

/// Copy with a new shape of equal element count.
TensorRef reshape(Tape* tape, const TensorRef& x, std::vector<int> shape);

}  // namespace dopplerkit
