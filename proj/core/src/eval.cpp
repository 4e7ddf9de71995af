#include "dopplerkit/eval.hpp"

#include <algorithm>

#include "dopplerkit/errors.hpp"
#include "dopplerkit/measure.hpp"
#include "dopplerkit/parallel.hpp"
#include "dopplerkit/textio.hpp"

namespace dopplerkit {

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(i * 0.01);
    return grid;
}

CaseEval evaluate_case(const SynthCase& c, const SegMask& pred, int case_index) {
    CaseEval e;
    e.case_index = case_index;
    e.flow_type = c.flow_type;
    for (int cls = 0; cls < 3; ++cls) {
        e.dsc_by_class[static_cast<std::size_t>(cls)] = dsc(pred, c.gt_mask, cls);
        e.iou_by_class[static_cast<std::size_t>(cls)] = iou(pred, c.gt_mask, cls);
    }
    const std::vector<Beat> pred_beats = extract_beats(pred, c.calibration);
    const std::vector<BeatMatch> matches = match_beats(pred_beats, c.gt_beats);
    e.n_gt_beats = static_cast<int>(c.gt_beats.size());
    e.n_matched = static_cast<int>(matches.size());
    for (const BeatMatch& m : matches) {
        const Measurement pm =
            measure_beat(pred, pred_beats[static_cast<std::size_t>(m.pred_index)], c.calibration);
        const Measurement& gm = c.gt_measurements[static_cast<std::size_t>(m.gt_index)];
        MeasurementRow row;
        row.case_index = case_index;
        row.flow_type = c.flow_type;
        row.gt_beat_index = m.gt_index;
        row.direction = gm.beat.direction;
        row.gt_vmax = gm.vmax;
        row.pred_vmax = pm.vmax;
        row.gt_vti = gm.vti;
        row.pred_vti = pm.vti;
        e.rows.push_back(row);
    }
    std::stable_sort(e.rows.begin(), e.rows.end(), [](const MeasurementRow& a, const MeasurementRow& b) {
        return a.gt_beat_index < b.gt_beat_index;
    });
    for (const EDEvent& ev : detect_ed(pred_beats, c.flow_type, c.calibration))
        e.pred_eds.push_back(ev.time);
    e.gt_eds = c.gt_ed_times;
    e.record_len = c.spec.cols * c.calibration.sec_per_col;
    return e;
}

namespace {

std::optional<double> safe_pcc(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 2) return std::nullopt;
    try {
        return pcc(xs, ys);
    } catch (const ContractError&) {
        return std::nullopt;
    }
}

}  // namespace

EvalReport evaluate_cases(const std::vector<SynthCase>& cases, const Model* model,
                          const EvalOptions& options) {
    if (!options.use_gt_masks && model == nullptr)
        throw ContractError("evaluate_cases: need a model unless use_gt_masks is set");
    EvalReport r;
    r.n_cases = static_cast<int>(cases.size());
    r.lambda = options.lambda;
    r.cases.resize(cases.size());

    parallel_for(cases.size(), options.workers, [&](std::size_t i) {
        const SynthCase& c = cases[i];
        const SegMask pred = options.use_gt_masks
                                 ? c.gt_mask
                                 : predict_mask(*model, c.image, c.spec.rows, c.spec.cols);
        r.cases[i] = evaluate_case(c, pred, static_cast<int>(i));
    });

    // deterministic sequential aggregation, independent of worker count
    std::map<FlowType, std::array<double, 3>> type_sums;
    std::map<FlowType, std::array<double, 3>> type_sums_iou;
    std::map<FlowType, int> type_counts;
    std::vector<double> gt_vmax, pr_vmax, gt_vti, pr_vti;
    std::map<FlowType, std::vector<double>> t_gt_vmax, t_pr_vmax, t_gt_vti, t_pr_vti;
    for (const CaseEval& e : r.cases) {
        for (std::size_t k = 0; k < 3; ++k) {
            r.mean_dsc[k] += e.dsc_by_class[k];
            r.mean_iou[k] += e.iou_by_class[k];
            type_sums[e.flow_type][k] += e.dsc_by_class[k];
            type_sums_iou[e.flow_type][k] += e.iou_by_class[k];
        }
        type_counts[e.flow_type] += 1;
        r.n_gt_beats += e.n_gt_beats;
        r.n_matched += e.n_matched;
        for (const MeasurementRow& row : e.rows) {
            gt_vmax.push_back(row.gt_vmax);
            pr_vmax.push_back(row.pred_vmax);
            gt_vti.push_back(row.gt_vti);
            pr_vti.push_back(row.pred_vti);
            t_gt_vmax[row.flow_type].push_back(row.gt_vmax);
            t_pr_vmax[row.flow_type].push_back(row.pred_vmax);
            t_gt_vti[row.flow_type].push_back(row.gt_vti);
            t_pr_vti[row.flow_type].push_back(row.pred_vti);
        }
    }
    const double n = std::max(1, r.n_cases);
    for (std::size_t k = 0; k < 3; ++k) {
        r.mean_dsc[k] /= n;
        r.mean_iou[k] /= n;
    }
    r.mean_dsc_all = (r.mean_dsc[0] + r.mean_dsc[1] + r.mean_dsc[2]) / 3.0;
    r.mean_iou_all = (r.mean_iou[0] + r.mean_iou[1] + r.mean_iou[2]) / 3.0;
    r.mean_dsc_foreground = (r.mean_dsc[1] + r.mean_dsc[2]) / 2.0;
    r.mean_iou_foreground = (r.mean_iou[1] + r.mean_iou[2]) / 2.0;
    for (const auto& [type, sums] : type_sums) {
        FlowTypeStats s;
        s.n_cases = type_counts[type];
        const double tn = s.n_cases;
        s.dsc_mean = (sums[0] + sums[1] + sums[2]) / (3.0 * tn);
        const auto& isums = type_sums_iou[type];
        s.iou_mean = (isums[0] + isums[1] + isums[2]) / (3.0 * tn);
        s.dsc_foreground = (sums[1] + sums[2]) / (2.0 * tn);
        r.per_type[type] = s;
    }

    r.pcc_vmax_pooled = safe_pcc(gt_vmax, pr_vmax);
    r.pcc_vti_pooled = safe_pcc(gt_vti, pr_vti);
    for (const auto& [type, xs] : t_gt_vmax)
        if (auto v = safe_pcc(xs, t_pr_vmax[type])) r.pcc_vmax_per_type[type] = *v;
    for (const auto& [type, xs] : t_gt_vti)
        if (auto v = safe_pcc(xs, t_pr_vti[type])) r.pcc_vti_per_type[type] = *v;

    r.tdr_measure_value = r.n_gt_beats > 0 ? tdr_measure(r.n_matched, r.n_gt_beats) : 0.0;

    const std::vector<double> grid =
        options.lambda_grid.empty() ? default_lambda_grid() : options.lambda_grid;
    std::vector<EdMatchCounts> grid_counts(grid.size());
    for (const CaseEval& e : r.cases) {
        const EdMatchCounts c = ed_match_counts(e.pred_eds, e.gt_eds, options.lambda, e.record_len);
        r.ed_counts.detected += c.detected;
        r.ed_counts.retained += c.retained;
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            const EdMatchCounts gc = ed_match_counts(e.pred_eds, e.gt_eds, grid[gi], e.record_len);
            grid_counts[gi].detected += gc.detected;
            grid_counts[gi].retained += gc.retained;
        }
    }
    r.tdr_ed_value = r.ed_counts.retained > 0
                         ? static_cast<double>(r.ed_counts.detected) / r.ed_counts.retained
                         : 0.0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double v = grid_counts[gi].retained > 0
                             ? static_cast<double>(grid_counts[gi].detected) / grid_counts[gi].retained
                             : 0.0;
        r.lambda_curve.push_back({grid[gi], v});
    }
    return r;
}

namespace {

nlohmann::json class_block(const std::array<double, 3>& per_class, double mean_all, double fg) {
    return {{"background", per_class[0]}, {"forward", per_class[1]}, {"reverse", per_class[2]},
            {"mean", mean_all},           {"foreground_mean", fg}};
}

}  // namespace

nlohmann::json eval_json(const EvalReport& r) {
    nlohmann::json per_type = nlohmann::json::object();
    for (const auto& [type, s] : r.per_type)
        per_type[flow_type_name(type)] = {{"n_cases", s.n_cases},
                                          {"dsc_mean", s.dsc_mean},
                                          {"iou_mean", s.iou_mean},
                                          {"dsc_foreground", s.dsc_foreground}};
    return {{"n_cases", r.n_cases},
            {"dsc", class_block(r.mean_dsc, r.mean_dsc_all, r.mean_dsc_foreground)},
            {"iou", class_block(r.mean_iou, r.mean_iou_all, r.mean_iou_foreground)},
            {"per_flow_type", per_type}};
}

nlohmann::json pcc_json(const EvalReport& r) {
    auto block = [](const std::optional<double>& pooled, const std::map<FlowType, double>& per_type) {
        nlohmann::json types = nlohmann::json::object();
        for (const auto& [type, v] : per_type) types[flow_type_name(type)] = v;
        nlohmann::json b = {{"per_flow_type", types}};
        if (pooled)
            b["pooled"] = *pooled;
        else
            b["pooled"] = nullptr;
        return b;
    };
    return {{"vmax", block(r.pcc_vmax_pooled, r.pcc_vmax_per_type)},
            {"vti", block(r.pcc_vti_pooled, r.pcc_vti_per_type)},
            {"n_pairs", r.n_matched}};
}

nlohmann::json tdr_json(const EvalReport& r) {
    return {{"tdr_measure", r.tdr_measure_value},
            {"n_matched", r.n_matched},
            {"n_gt_beats", r.n_gt_beats},
            {"tdr_ed", r.tdr_ed_value},
            {"lambda", r.lambda},
            {"n_ed_detected", r.ed_counts.detected},
            {"n_ed_retained", r.ed_counts.retained}};
}

std::string measurements_csv(const EvalReport& r) {
    std::string out = "case,flow_type,beat,direction,gt_vmax,pred_vmax,gt_vti,pred_vti\n";
    for (const CaseEval& e : r.cases)
        for (const MeasurementRow& row : e.rows) {
            out += join_csv({std::to_string(row.case_index), flow_type_name(row.flow_type),
                             std::to_string(row.gt_beat_index), direction_name(row.direction),
                             format_double(row.gt_vmax), format_double(row.pred_vmax),
                             format_double(row.gt_vti), format_double(row.pred_vti)});
            out += '\n';
        }
    return out;
}

std::string lambda_curve_csv(const EvalReport& r) {
    std::string out = "lambda,tdr_ed\n";
    for (const auto& [lambda, tdr] : r.lambda_curve) {
        out += format_double(lambda);
        out += ',';
        out += format_double(tdr);
        out += '\n';
    }
    return out;
}

}  // namespace dopplerkit
