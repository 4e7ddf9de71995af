#pragma once

#include <cstdint>
#include <vector>

#include "dopplerkit/adam.hpp"
#include "dopplerkit/network.hpp"
#include "dopplerkit/synth.hpp"

namespace dopplerkit {

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 32;
    int max_epochs = 200;
    int early_stop_patience = 10;
    std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& tc);  // throws ConfigError

/// One case prepared for the network: letterboxed [-1, 1] pixels, per-pixel
/// class targets (letterbox padding carries kIgnoreIndex), flow-type label.
struct Example {
    std::vector<double> pixels;
    std::vector<int> seg;
    int flow = 0;
};

Example prepare_example(const SynthCase& c, const NetworkConfig& config);
std::vector<Example> prepare_examples(const std::vector<SynthCase>& cases,
                                      const NetworkConfig& config);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_seg_loss = 0.0;
};

struct TrainResult {
    Model best;
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_loss = 0.0;
};

/// One pass over deterministically shuffled mini-batches; Adam update after
/// each batch. Returns the per-batch total losses. Throws NumericError on a
/// non-finite loss.
std::vector<double> train_epoch(Model& model, const std::vector<Example>& examples,
                                std::vector<AdamState>& opt, const TrainConfig& tc, int epoch);

/// Mean segmentation cross-entropy over the set (context loss excluded);
/// inference only.
double validation_seg_loss(const Model& model, const std::vector<Example>& examples,
                           int batch_size);

/// Full training run with early stopping on the validation segmentation
/// loss: stops once the loss has failed to improve for more than
/// `early_stop_patience` consecutive epochs. `model` is left in its
/// final-epoch state; the best-validation snapshot is returned.
TrainResult train(Model& model, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainConfig& tc);

}  // namespace dopplerkit
