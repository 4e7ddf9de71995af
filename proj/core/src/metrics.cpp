#include "dopplerkit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dopplerkit/errors.hpp"
#include "dopplerkit/rng.hpp"

namespace dopplerkit {

namespace {

constexpr double kBoundaryExclusionSeconds = 0.1;
constexpr std::uint64_t kSplitTag = 0x53504c54ULL;

struct OverlapCounts {
    std::size_t pred = 0, gt = 0, both = 0;
};

OverlapCounts overlap_counts(const SegMask& pred, const SegMask& gt, int class_id) {
    if (pred.rows != gt.rows || pred.cols != gt.cols)
        throw DimensionError("mask metrics: shapes must match");
    OverlapCounts c;
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
        const bool p = pred.labels[i] == class_id;
        const bool g = gt.labels[i] == class_id;
        c.pred += p;
        c.gt += g;
        c.both += p && g;
    }
    return c;
}

}  // namespace

double dsc(const SegMask& pred, const SegMask& gt, int class_id) {
    const OverlapCounts c = overlap_counts(pred, gt, class_id);
    if (c.pred + c.gt == 0) return 1.0;
    return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.pred + c.gt);
}

double iou(const SegMask& pred, const SegMask& gt, int class_id) {
    const OverlapCounts c = overlap_counts(pred, gt, class_id);
    const std::size_t uni = c.pred + c.gt - c.both;
    if (uni == 0) return 1.0;
    return static_cast<double>(c.both) / static_cast<double>(uni);
}

double beat_interval_iou(const Beat& a, const Beat& b) {
    const int overlap = std::min(a.end_col, b.end_col) - std::max(a.start_col, b.start_col) + 1;
    if (overlap <= 0) return 0.0;
    const int uni = a.width() + b.width() - overlap;
    return static_cast<double>(overlap) / static_cast<double>(uni);
}

std::vector<BeatMatch> match_beats(const std::vector<Beat>& pred_beats,
                                   const std::vector<Beat>& gt_beats) {
    struct Candidate {
        double iou;
        int gt, pred;
    };
    std::vector<Candidate> cands;
    for (int g = 0; g < static_cast<int>(gt_beats.size()); ++g)
        for (int p = 0; p < static_cast<int>(pred_beats.size()); ++p) {
            if (gt_beats[g].direction != pred_beats[p].direction) continue;
            const double v = beat_interval_iou(gt_beats[g], pred_beats[p]);
            if (v >= 0.5) cands.push_back({v, g, p});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.gt != b.gt) return a.gt < b.gt;
        return a.pred < b.pred;
    });
    std::vector<bool> used_gt(gt_beats.size(), false), used_pred(pred_beats.size(), false);
    std::vector<BeatMatch> matches;
    for (const Candidate& c : cands) {
        if (used_gt[c.gt] || used_pred[c.pred]) continue;
        used_gt[c.gt] = used_pred[c.pred] = true;
        matches.push_back({c.pred, c.gt, c.iou});
    }
    return matches;
}

double pcc(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DimensionError("pcc: series lengths differ");
    if (xs.size() < 2) throw ContractError("pcc: need at least two points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ContractError("pcc: undefined for zero variance");
    return sxy / std::sqrt(sxx * syy);
}

double tdr_measure(int n_matched, int n_gt) {
    if (n_gt < 1) throw ContractError("tdr_measure: undefined without ground-truth beats");
    return static_cast<double>(n_matched) / static_cast<double>(n_gt);
}

EdMatchCounts ed_match_counts(const std::vector<double>& pred_eds, const std::vector<double>& gt_eds,
                              double lambda, double record_len) {
    if (lambda <= 0.0) throw ConfigError("tdr_ed: lambda must be positive");
    std::vector<int> retained;
    for (int g = 0; g < static_cast<int>(gt_eds.size()); ++g)
        if (gt_eds[g] >= kBoundaryExclusionSeconds && gt_eds[g] <= record_len - kBoundaryExclusionSeconds)
            retained.push_back(g);

    struct Candidate {
        double dist;
        int gt, pred;
    };
    std::vector<Candidate> cands;
    for (int gi = 0; gi < static_cast<int>(retained.size()); ++gi)
        for (int p = 0; p < static_cast<int>(pred_eds.size()); ++p) {
            const double d = std::abs(pred_eds[p] - gt_eds[retained[gi]]);
            if (d <= lambda) cands.push_back({d, gi, p});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.gt != b.gt) return a.gt < b.gt;
        return a.pred < b.pred;
    });
    std::vector<bool> used_gt(retained.size(), false), used_pred(pred_eds.size(), false);
    EdMatchCounts counts;
    counts.retained = static_cast<int>(retained.size());
    for (const Candidate& c : cands) {
        if (used_gt[c.gt] || used_pred[c.pred]) continue;
        used_gt[c.gt] = used_pred[c.pred] = true;
        counts.detected += 1;
    }
    return counts;
}

double tdr_ed(const std::vector<double>& pred_eds, const std::vector<double>& gt_eds, double lambda,
              double record_len) {
    const EdMatchCounts c = ed_match_counts(pred_eds, gt_eds, lambda, record_len);
    if (c.retained == 0) throw ContractError("tdr_ed: no ground-truth events retained");
    return static_cast<double>(c.detected) / static_cast<double>(c.retained);
}

std::vector<std::pair<double, double>> sweep_lambda(const std::vector<double>& pred_eds,
                                                    const std::vector<double>& gt_eds,
                                                    const std::vector<double>& lambdas,
                                                    double record_len) {
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (lambdas[i] <= lambdas[i - 1]) throw ConfigError("sweep_lambda: grid must be ascending");
    std::vector<std::pair<double, double>> curve;
    curve.reserve(lambdas.size());
    for (double l : lambdas) curve.push_back({l, tdr_ed(pred_eds, gt_eds, l, record_len)});
    return curve;
}

SplitPlan mc_split(const std::vector<int>& case_ids, const std::vector<double>& ratios,
                   int n_repeats, std::uint64_t seed) {
    if (ratios.size() != 3) throw ConfigError("mc_split: need train/val/test ratios");
    double total = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw ConfigError("mc_split: ratios must be non-negative");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mc_split: ratios must sum to 1");
    if (case_ids.size() < 3) throw ConfigError("mc_split: need at least three cases");
    if (n_repeats < 1) throw ConfigError("mc_split: need at least one repeat");

    SplitPlan plan;
    plan.ratios = ratios;
    plan.n_repeats = n_repeats;
    plan.seed = seed;
    const auto n = static_cast<double>(case_ids.size());
    const int n_val = static_cast<int>(std::floor(n * ratios[1]));
    const int n_test = static_cast<int>(std::floor(n * ratios[2]));
    const int n_train = static_cast<int>(case_ids.size()) - n_val - n_test;
    for (int r = 0; r < n_repeats; ++r) {
        std::vector<int> ids = case_ids;
        Rng rng(mix_u64(mix_u64(seed, kSplitTag), static_cast<std::uint64_t>(r)));
        rng.shuffle(ids);
        SplitRepeat rep;
        rep.train.assign(ids.begin(), ids.begin() + n_train);
        rep.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
        rep.test.assign(ids.begin() + n_train + n_val, ids.end());
        plan.repeats.push_back(std::move(rep));
    }
    return plan;
}

}  // namespace dopplerkit
