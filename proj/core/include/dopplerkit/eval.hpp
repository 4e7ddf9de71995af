#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dopplerkit/metrics.hpp"
#include "dopplerkit/network.hpp"
#include "dopplerkit/synth.hpp"

namespace dopplerkit {

struct EvalOptions {
    double lambda = 0.08;
    std::vector<double> lambda_grid;  // empty = default_lambda_grid()
    bool use_gt_masks = false;        // self-evaluation: predictions := GT masks
    int workers = 1;
};

/// 0.01 s .. 0.20 s in 0.01 s steps.
std::vector<double> default_lambda_grid();

struct MeasurementRow {
    int case_index = 0;
    FlowType flow_type = FlowType::AV_INFLOW;
    int gt_beat_index = 0;
    FlowDirection direction = FlowDirection::forward;
    double gt_vmax = 0, pred_vmax = 0;
    double gt_vti = 0, pred_vti = 0;
};

struct CaseEval {
    int case_index = 0;
    FlowType flow_type = FlowType::AV_INFLOW;
    std::array<double, 3> dsc_by_class{};  // background, forward, reverse
    std::array<double, 3> iou_by_class{};
    int n_gt_beats = 0;
    int n_matched = 0;
    std::vector<MeasurementRow> rows;
    std::vector<double> pred_eds;
    std::vector<double> gt_eds;
    double record_len = 0.0;
};

struct FlowTypeStats {
    int n_cases = 0;
    double dsc_mean = 0.0;
    double iou_mean = 0.0;
    double dsc_foreground = 0.0;
};

struct EvalReport {
    int n_cases = 0;
    std::array<double, 3> mean_dsc{};
    std::array<double, 3> mean_iou{};
    double mean_dsc_all = 0, mean_iou_all = 0;
    double mean_dsc_foreground = 0, mean_iou_foreground = 0;
    std::map<FlowType, FlowTypeStats> per_type;
    std::optional<double> pcc_vmax_pooled, pcc_vti_pooled;
    std::map<FlowType, double> pcc_vmax_per_type, pcc_vti_per_type;
    int n_gt_beats = 0, n_matched = 0;
    double tdr_measure_value = 0.0;
    EdMatchCounts ed_counts;
    double tdr_ed_value = 0.0;
    double lambda = 0.08;
    std::vector<std::pair<double, double>> lambda_curve;
    std::vector<CaseEval> cases;
};

/// Metrics of one case against an arbitrary predicted mask.
CaseEval evaluate_case(const SynthCase& c, const SegMask& pred, int case_index);

/// Full protocol over a case list. model may be null only with use_gt_masks.
EvalReport evaluate_cases(const std::vector<SynthCase>& cases, const Model* model,
                          const EvalOptions& options);

nlohmann::json eval_json(const EvalReport& r);
nlohmann::json pcc_json(const EvalReport& r);
nlohmann::json tdr_json(const EvalReport& r);
std::string measurements_csv(const EvalReport& r);
std::string lambda_curve_csv(const EvalReport& r);

}  // namespace dopplerkit
