#pragma once

#include <cstdint>
#include <vector>

#include "dopplerkit/doppler_types.hpp"

namespace dopplerkit {

/// Dice coefficient for one class; both-empty pairs score 1.0.
double dsc(const SegMask& pred, const SegMask& gt, int class_id);

/// Intersection over union for one class; both-empty pairs score 1.0.
double iou(const SegMask& pred, const SegMask& gt, int class_id);

struct BeatMatch {
    int pred_index = -1;
    int gt_index = -1;
    double iou = 0.0;
};

/// Greedy one-to-one beat matching by descending column-interval IoU;
/// a pair qualifies iff direction matches and interval IoU >= 0.5.
std::vector<BeatMatch> match_beats(const std::vector<Beat>& pred_beats,
                                   const std::vector<Beat>& gt_beats);

/// Interval IoU of two inclusive column ranges.
double beat_interval_iou(const Beat& a, const Beat& b);

/// Pearson correlation coefficient. Throws ContractError for fewer than two
/// points or zero variance.
double pcc(const std::vector<double>& xs, const std::vector<double>& ys);

/// Matched predictions over ground-truth count. Throws ContractError if n_gt == 0.
double tdr_measure(int n_matched, int n_gt);

struct EdMatchCounts {
    int detected = 0;
    int retained = 0;  // GT events surviving the 100 ms boundary exclusion
};

/// Nearest-first one-to-one ED matching within lambda seconds, after dropping
/// GT events within 100 ms of either record boundary.
EdMatchCounts ed_match_counts(const std::vector<double>& pred_eds, const std::vector<double>& gt_eds,
                              double lambda, double record_len);

/// detected / retained. Throws ContractError when no GT event is retained.
double tdr_ed(const std::vector<double>& pred_eds, const std::vector<double>& gt_eds, double lambda,
              double record_len);

/// TDR_ED evaluated over an ascending lambda grid; the curve is non-decreasing.
std::vector<std::pair<double, double>> sweep_lambda(const std::vector<double>& pred_eds,
                                                    const std::vector<double>& gt_eds,
                                                    const std::vector<double>& lambdas,
                                                    double record_len);

struct SplitRepeat {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

struct SplitPlan {
    std::vector<double> ratios;  // train/val/test
    int n_repeats = 0;
    std::uint64_t seed = 0;
    std::vector<SplitRepeat> repeats;
};

/// Monte Carlo splits: per repeat, a deterministic shuffle then contiguous
/// slicing with floor(n * ratio) for val and test, remainder to train.
SplitPlan mc_split(const std::vector<int>& case_ids, const std::vector<double>& ratios,
                   int n_repeats, std::uint64_t seed);

}  // namespace dopplerkit
