#include "dopplerkit/network.hpp"

#include <algorithm>
#include <cmath>

#include "dopplerkit/errors.hpp"
#include "dopplerkit/ops.hpp"
#include "dopplerkit/rng.hpp"

namespace dopplerkit {

namespace {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

int stage_channels(const NetworkConfig& cfg, int stage) { return cfg.base_channels << stage; }

}  // namespace

void validate_network_config(const NetworkConfig& config) {
    if (config.depth < 2) throw ConfigError("network: depth must be >= 2");
    if (config.base_channels < 1) throw ConfigError("network: base_channels must be >= 1");
    if (config.num_seg_classes < 2 || config.num_flow_types < 2)
        throw ConfigError("network: class counts must be >= 2");
    if (config.blur_k < 1 || config.blur_k % 2 == 0)
        throw ConfigError("network: blur kernel size must be odd");
    if (config.mu < 0.0) throw ConfigError("network: mu must be non-negative");
    const int div = 1 << config.depth;
    if (config.input_rows % div != 0 || config.input_cols % div != 0)
        throw ConfigError("network: input dims must be divisible by 2^depth");
    if (config.fusion != "add" && config.fusion != "gate")
        throw ConfigError("network: fusion must be \"add\" or \"gate\"");
}

std::vector<LayerSpec> enumerate_layers(const NetworkConfig& cfg) {
    std::vector<LayerSpec> layers;
    auto conv = [&layers](const std::string& name, int out_ch, int in_ch, int k) {
        layers.push_back({name + ".w", {out_ch, in_ch, k, k}});
        layers.push_back({name + ".b", {out_ch}});
    };
    int in_ch = 1;
    for (int i = 0; i < cfg.depth; ++i) {
        const int ch = stage_channels(cfg, i);
        conv("enc" + std::to_string(i) + ".conv1", ch, in_ch, 3);
        conv("enc" + std::to_string(i) + ".conv2", ch, ch, 3);
        in_ch = ch;
    }
    const int bott = stage_channels(cfg, cfg.depth);
    conv("bottleneck.conv1", bott, in_ch, 3);
    conv("bottleneck.conv2", bott, bott, 3);
    if (cfg.shape_embed) {
        conv("se.context", bott, bott, 1);
        conv("se.fuse", bott, bott, 3);
        conv("se.head", cfg.num_flow_types, bott, 1);
    }
    int above = bott;
    for (int i = cfg.depth - 1; i >= 0; --i) {
        const int ch = stage_channels(cfg, i);
        conv("dec" + std::to_string(i) + ".conv1", ch, above + ch, 3);
        conv("dec" + std::to_string(i) + ".conv2", ch, ch, 3);
        above = ch;
    }
    conv("head", cfg.num_seg_classes, above, 1);
    return layers;
}

const TensorRef& Model::param(const std::string& name) const {
    for (const auto& [n, t] : params)
        if (n == name) return t;
    throw ContractError("model: unknown parameter " + name);
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t->numel();
    return n;
}

void Model::zero_grads() const {
    for (const auto& [name, t] : params) {
        t->ensure_grad();
        t->zero_grad();
    }
}

Model build_model(const NetworkConfig& config, std::uint64_t seed) {
    validate_network_config(config);
    Model model;
    model.config = config;
    for (const LayerSpec& spec : enumerate_layers(config)) {
        auto t = make_tensor(spec.shape, true);
        if (spec.shape.size() == 4) {
            const int fan_in = spec.shape[1] * spec.shape[2] * spec.shape[3];
            const double bound = std::sqrt(6.0 / fan_in);
            Rng rng(mix_u64(seed, fnv1a64(spec.name)));
            for (double& v : t->data) v = rng.uniform(-bound, bound);
        }
        model.params.push_back({spec.name, std::move(t)});
    }
    return model;
}

Model clone_model(const Model& model) {
    Model copy;
    copy.config = model.config;
    copy.params.reserve(model.params.size());
    for (const auto& [name, t] : model.params)
        copy.params.push_back({name, make_tensor(t->shape, t->data, true)});
    return copy;
}

namespace {

TensorRef conv_block(Tape* tape, const Model& m, const TensorRef& x, const std::string& name,
                     int padding) {
    return relu(tape, conv2d(tape, x, m.param(name + ".w"), m.param(name + ".b"), 1, padding));
}

struct SeResult {
    TensorRef fused;
    TensorRef context;  // N x C x 1 x 1, post 1x1 conv
};

SeResult se_block(Tape* tape, const Model& m, const TensorRef& f) {
    SeResult r;
    const TensorRef pooled = global_avg_pool(tape, f);
    r.context = conv2d(tape, pooled, m.param("se.context.w"), m.param("se.context.b"), 1, 0);
    const TensorRef mixed = m.config.fusion == "gate" ? mul(tape, f, sigmoid(tape, r.context))
                                                      : add(tape, f, r.context);
    r.fused = conv_block(tape, m, mixed, "se.fuse", 1);
    return r;
}

/// Encoder + bottleneck (+ shape embedding); fills skips with the
/// pre-downsample feature of each stage.
TensorRef encode(Tape* tape, const Model& m, const TensorRef& x, std::vector<TensorRef>* skips,
                 TensorRef* shape_logits) {
    const NetworkConfig& cfg = m.config;
    TensorRef cur = x;
    for (int i = 0; i < cfg.depth; ++i) {
        const std::string base = "enc" + std::to_string(i);
        cur = conv_block(tape, m, cur, base + ".conv1", 1);
        cur = conv_block(tape, m, cur, base + ".conv2", 1);
        if (skips) skips->push_back(cur);
        if (cfg.anti_alias)
            cur = blur_pool(tape, max_pool(tape, cur, 2, 1), cfg.blur_k, 2);
        else
            cur = max_pool(tape, cur, 2, 2);
    }
    cur = conv_block(tape, m, cur, "bottleneck.conv1", 1);
    cur = conv_block(tape, m, cur, "bottleneck.conv2", 1);
    if (cfg.shape_embed) {
        SeResult se = se_block(tape, m, cur);
        cur = se.fused;
        if (shape_logits) *shape_logits = shape_head(tape, m, se.context);
    }
    return cur;
}

}  // namespace

TensorRef shape_embedding_block(Tape* tape, const Model& model, const TensorRef& bottleneck) {
    if (!model.config.shape_embed) throw ContractError("shape_embedding_block: module disabled");
    return se_block(tape, model, bottleneck).fused;
}

TensorRef shape_head(Tape* tape, const Model& model, const TensorRef& context) {
    const TensorRef logits = conv2d(tape, context, model.param("se.head.w"), model.param("se.head.b"), 1, 0);
    return reshape(tape, logits, {context->shape[0], model.config.num_flow_types});
}

ForwardResult forward(const Model& model, const TensorRef& batch, Tape* tape) {
    if (!batch || batch->shape.size() != 4 || batch->shape[1] != 1)
        throw DimensionError("forward: batch must be N x 1 x H x W");
    if (batch->shape[2] != model.config.input_rows || batch->shape[3] != model.config.input_cols)
        throw DimensionError("forward: batch spatial dims do not match the configured input size");

    ForwardResult result;
    std::vector<TensorRef> skips;
    TensorRef cur = encode(tape, model, batch, &skips, &result.shape_logits);
    for (int i = model.config.depth - 1; i >= 0; --i) {
        cur = upsample_nearest2x(tape, cur);
        cur = concat_channels(tape, cur, skips[static_cast<std::size_t>(i)]);
        const std::string base = "dec" + std::to_string(i);
        cur = conv_block(tape, model, cur, base + ".conv1", 1);
        cur = conv_block(tape, model, cur, base + ".conv2", 1);
    }
    result.seg_logits = conv2d(tape, cur, model.param("head.w"), model.param("head.b"), 1, 0);
    return result;
}

TensorRef bottleneck_features(const Model& model, const TensorRef& batch) {
    return encode(nullptr, model, batch, nullptr, nullptr);
}

TensorRef total_loss(Tape* tape, const TensorRef& seg_logits, const std::vector<int>& seg_gt,
                     const TensorRef& shape_logits, const std::vector<int>& flow_gt, double mu,
                     int ignore_index) {
    TensorRef loss = cross_entropy(tape, seg_logits, seg_gt, ignore_index);
    if (shape_logits && !flow_gt.empty())
        loss = add(tape, loss, scale(tape, cross_entropy(tape, shape_logits, flow_gt), mu));
    return loss;
}

int nearest_src_index(int dst_index, int src_n, int dst_n) {
    const long long idx = (2LL * dst_index + 1) * src_n / (2LL * dst_n);
    return static_cast<int>(std::min<long long>(idx, src_n - 1));
}

Letterbox letterbox_image(const std::vector<std::uint8_t>& image, int rows, int cols,
                          const NetworkConfig& config) {
    if (rows < 1 || cols < 1 || image.size() != static_cast<std::size_t>(rows) * cols)
        throw DimensionError("letterbox: image size does not match dims");
    const int ir = config.input_rows, ic = config.input_cols;
    const double scl = std::min(static_cast<double>(ir) / rows, static_cast<double>(ic) / cols);
    Letterbox lb;
    lb.content_rows = std::clamp(static_cast<int>(std::llround(rows * scl)), 1, ir);
    lb.content_cols = std::clamp(static_cast<int>(std::llround(cols * scl)), 1, ic);
    lb.pixels.resize(static_cast<std::size_t>(ir) * ic);
    for (int r = 0; r < ir; ++r) {
        const int sr = nearest_src_index(std::min(r, lb.content_rows - 1), rows, lb.content_rows);
        for (int c = 0; c < ic; ++c) {
            const int sc = nearest_src_index(std::min(c, lb.content_cols - 1), cols, lb.content_cols);
            const double v = image[static_cast<std::size_t>(sr) * cols + sc];
            lb.pixels[static_cast<std::size_t>(r) * ic + c] = v / 127.5 - 1.0;
        }
    }
    return lb;
}

SegMask predict_mask(const Model& model, const std::vector<std::uint8_t>& image, int rows, int cols) {
    const Letterbox lb = letterbox_image(image, rows, cols, model.config);
    const int ir = model.config.input_rows, ic = model.config.input_cols;
    auto x = make_tensor({1, 1, ir, ic}, lb.pixels);
    const ForwardResult fr = forward(model, x, nullptr);

    const int classes = model.config.num_seg_classes;
    SegMask net_mask = make_mask(ir, ic);
    const auto& logits = fr.seg_logits;
    for (int r = 0; r < ir; ++r)
        for (int c = 0; c < ic; ++c) {
            int best = 0;
            double best_v = logits->data[logits->at(0, 0, r, c)];
            for (int k = 1; k < classes; ++k) {
                const double v = logits->data[logits->at(0, k, r, c)];
                if (v > best_v) {
                    best_v = v;
                    best = k;
                }
            }
            net_mask.at(r, c) = static_cast<std::uint8_t>(best);
        }

    SegMask out = make_mask(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const int sr = nearest_src_index(r, lb.content_rows, rows);
        for (int c = 0; c < cols; ++c) {
            const int sc = nearest_src_index(c, lb.content_cols, cols);
            out.at(r, c) = net_mask.at(sr, sc);
        }
    }
    return out;
}

}  // namespace dopplerkit
