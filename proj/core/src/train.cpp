#include "dopplerkit/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "dopplerkit/errors.hpp"
#include "dopplerkit/ops.hpp"
#include "dopplerkit/rng.hpp"

namespace dopplerkit {

namespace {

constexpr std::uint64_t kShuffleTag = 0x53485546ULL;

struct Batch {
    TensorRef x;
    std::vector<int> seg;
    std::vector<int> flow;
};

Batch assemble_batch(const std::vector<Example>& examples, const std::vector<int>& order,
                     std::size_t first, std::size_t count, const NetworkConfig& cfg) {
    const int H = cfg.input_rows, W = cfg.input_cols;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Batch b;
    b.x = make_tensor({static_cast<int>(count), 1, H, W});
    b.seg.resize(count * plane);
    b.flow.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Example& ex = examples[static_cast<std::size_t>(order[first + i])];
        std::copy(ex.pixels.begin(), ex.pixels.end(), b.x->data.begin() + i * plane);
        std::copy(ex.seg.begin(), ex.seg.end(), b.seg.begin() + i * plane);
        b.flow[i] = ex.flow;
    }
    return b;
}

}  // namespace

void validate_train_config(const TrainConfig& tc) {
    if (tc.lr <= 0.0) throw ConfigError("train: learning rate must be positive");
    if (tc.batch_size < 1) throw ConfigError("train: batch size must be positive");
    if (tc.max_epochs < 1) throw ConfigError("train: max epochs must be positive");
    if (tc.early_stop_patience < 0) throw ConfigError("train: patience must be non-negative");
}

Example prepare_example(const SynthCase& c, const NetworkConfig& config) {
    Example ex;
    const Letterbox lb = letterbox_image(c.image, c.spec.rows, c.spec.cols, config);
    ex.pixels = lb.pixels;
    ex.flow = static_cast<int>(c.flow_type);
    const int ir = config.input_rows, ic = config.input_cols;
    ex.seg.assign(static_cast<std::size_t>(ir) * ic, kIgnoreIndex);
    for (int r = 0; r < lb.content_rows; ++r) {
        const int sr = nearest_src_index(r, c.spec.rows, lb.content_rows);
        for (int col = 0; col < lb.content_cols; ++col) {
            const int sc = nearest_src_index(col, c.spec.cols, lb.content_cols);
            ex.seg[static_cast<std::size_t>(r) * ic + col] = c.gt_mask.at(sr, sc);
        }
    }
    return ex;
}

std::vector<Example> prepare_examples(const std::vector<SynthCase>& cases,
                                      const NetworkConfig& config) {
    std::vector<Example> out;
    out.reserve(cases.size());
    for (const SynthCase& c : cases) out.push_back(prepare_example(c, config));
    return out;
}

std::vector<double> train_epoch(Model& model, const std::vector<Example>& examples,
                                std::vector<AdamState>& opt, const TrainConfig& tc, int epoch) {
    if (examples.empty()) throw DataError("train: empty training split");
    if (opt.size() != model.params.size()) throw ContractError("train: optimizer state size mismatch");

    std::vector<int> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_u64(mix_u64(tc.seed, kShuffleTag), static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    std::vector<double> losses;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(tc.batch_size)) {
        const std::size_t count = std::min<std::size_t>(tc.batch_size, order.size() - first);
        Batch batch = assemble_batch(examples, order, first, count, model.config);
        Tape tape;
        const ForwardResult fr = forward(model, batch.x, &tape);
        const TensorRef loss =
            total_loss(&tape, fr.seg_logits, batch.seg, fr.shape_logits, batch.flow, model.config.mu);
        const double value = loss->data[0];
        if (!std::isfinite(value)) throw NumericError("train: non-finite training loss");
        model.zero_grads();
        tape.backward(loss);
        for (std::size_t i = 0; i < model.params.size(); ++i)
            adam_step(model.params[i].second, opt[i]);
        losses.push_back(value);
    }
    return losses;
}

double validation_seg_loss(const Model& model, const std::vector<Example>& examples,
                           int batch_size) {
    if (examples.empty()) throw DataError("train: empty validation split");
    std::vector<int> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    double weighted = 0.0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min<std::size_t>(batch_size, order.size() - first);
        Batch batch = assemble_batch(examples, order, first, count, model.config);
        const ForwardResult fr = forward(model, batch.x, nullptr);
        const TensorRef loss = cross_entropy(nullptr, fr.seg_logits, batch.seg, kIgnoreIndex);
        weighted += loss->data[0] * static_cast<double>(count);
    }
    const double value = weighted / static_cast<double>(examples.size());
    if (!std::isfinite(value)) throw NumericError("train: non-finite validation loss");
    return value;
}

TrainResult train(Model& model, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainConfig& tc) {
    validate_train_config(tc);
    if (train_set.empty() || val_set.empty()) throw DataError("train: empty split");

    std::vector<AdamState> opt;
    opt.reserve(model.params.size());
    for (const auto& [name, t] : model.params) opt.push_back(make_adam_state(t->numel(), tc.lr));

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
        const std::vector<double> losses = train_epoch(model, train_set, opt, tc, epoch);
        double mean = 0.0;
        for (double v : losses) mean += v;
        mean /= static_cast<double>(losses.size());
        const double val = validation_seg_loss(model, val_set, tc.batch_size);
        result.history.push_back({epoch, mean, val});
        if (val < result.best_val_loss) {
            result.best_val_loss = val;
            result.best_epoch = epoch;
            result.best = clone_model(model);
            stale = 0;
        } else {
            stale += 1;
            if (stale > tc.early_stop_patience) break;
        }
    }
    return result;
}

}  // namespace dopplerkit
