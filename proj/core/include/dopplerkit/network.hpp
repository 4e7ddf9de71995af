#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dopplerkit/doppler_types.hpp"
#include "dopplerkit/tensor.hpp"

namespace dopplerkit {

struct NetworkConfig {
    int depth = 3;          // encoder stages
    int base_channels = 16;
    int num_seg_classes = 3;
    int num_flow_types = 7;
    bool anti_alias = true;
    bool shape_embed = true;
    int blur_k = 3;
    double mu = 1.0;  // context-loss weight
    int input_rows = 64;
    int input_cols = 128;
    std::string fusion = "add";  // "add" | "gate" (sigmoid gating)

    bool operator==(const NetworkConfig&) const = default;
};

void validate_network_config(const NetworkConfig& config);  // throws ConfigError

/// Targets use this value for pixels that must not contribute to the loss
/// (letterbox padding).
inline constexpr int kIgnoreIndex = -1;

struct LayerSpec {
    std::string name;
    std::vector<int> shape;
};

/// Parameter layout implied by a config, in serialization order.
std::vector<LayerSpec> enumerate_layers(const NetworkConfig& config);

/// Encoder-decoder segmentation network; parameters keyed by layer path in a
/// fixed order that the checkpoint format relies on.
struct Model {
    NetworkConfig config;
    std::vector<std::pair<std::string, TensorRef>> params;

    const TensorRef& param(const std::string& name) const;  // throws ContractError
    std::size_t parameter_count() const;                    // total scalars
    void zero_grads() const;
};

/// He-style scaled-uniform initialization, deterministic from the seed; each
/// layer draws from its own stream so module toggles leave other layers'
/// values unchanged.
Model build_model(const NetworkConfig& config, std::uint64_t seed);

/// Deep copy (fresh tensors).
Model clone_model(const Model& model);

/// Context embedding: e = conv1x1(GAP(f)), then fusion of e into f followed
/// by a 3x3 convolution. "add" fusion broadcasts e over the map; "gate"
/// multiplies by sigmoid(e).
TensorRef shape_embedding_block(Tape* tape, const Model& model, const TensorRef& bottleneck);

/// Pooled-context classifier over flow types: N x C x 1 x 1 -> N x T logits.
TensorRef shape_head(Tape* tape, const Model& model, const TensorRef& context);

struct ForwardResult {
    TensorRef seg_logits;    // N x num_seg_classes x H x W
    TensorRef shape_logits;  // N x num_flow_types, null when shape_embed is off
};

/// Full forward pass. Inputs are expected scaled to [-1, 1]; this is a
/// documented contract, not something the network can detect.
ForwardResult forward(const Model& model, const TensorRef& batch, Tape* tape);

/// Pixelwise mean seg cross-entropy plus mu times the flow-type cross-entropy.
/// shape_logits may be null (or flow_gt empty) to skip the context term.
TensorRef total_loss(Tape* tape, const TensorRef& seg_logits, const std::vector<int>& seg_gt,
                     const TensorRef& shape_logits, const std::vector<int>& flow_gt, double mu,
                     int ignore_index = kIgnoreIndex);

/// Aspect-preserving letterbox of an 8-bit image to the network input size:
/// nearest-neighbor resample anchored top-left, edge-value padding.
struct Letterbox {
    int content_rows = 0;
    int content_cols = 0;
    std::vector<double> pixels;  // input_rows * input_cols, scaled to [-1, 1]
};

Letterbox letterbox_image(const std::vector<std::uint8_t>& image, int rows, int cols,
                          const NetworkConfig& config);

/// Argmax segmentation of one spectrogram at its original resolution; ties
/// resolve to the lowest class index.
SegMask predict_mask(const Model& model, const std::vector<std::uint8_t>& image, int rows, int cols);

/// Bottleneck feature map (after the shape-embedding block when enabled);
/// exposed for shift-equivariance analysis.
TensorRef bottleneck_features(const Model& model, const TensorRef& batch);

/// Nearest-neighbor index map shared by every resize in the toolkit.
int nearest_src_index(int dst_index, int src_n, int dst_n);

}  // namespace dopplerkit
