#include "dopplerkit/measure.hpp"

#include <algorithm>
#include <cmath>

#include "dopplerkit/errors.hpp"

namespace dopplerkit {

namespace {

std::uint8_t class_for(FlowDirection dir) {
    return dir == FlowDirection::forward ? kClassForward : kClassReverse;
}

std::vector<Beat> runs_for_direction(const SegMask& mask, FlowDirection dir, int min_gap_cols,
                                     int min_width_cols) {
    const std::uint8_t cls = class_for(dir);
    std::vector<bool> has(static_cast<std::size_t>(mask.cols), false);
    for (int c = 0; c < mask.cols; ++c)
        for (int r = 0; r < mask.rows; ++r)
            if (mask.at(r, c) == cls) {
                has[c] = true;
                break;
            }

    std::vector<Beat> runs;
    int start = -1;
    for (int c = 0; c <= mask.cols; ++c) {
        const bool on = c < mask.cols && has[c];
        if (on && start < 0) start = c;
        if (!on && start >= 0) {
            runs.push_back({start, c - 1, dir});
            start = -1;
        }
    }

    // merge runs separated by fewer than min_gap_cols background columns
    std::vector<Beat> merged;
    for (const Beat& run : runs) {
        if (!merged.empty() && run.start_col - merged.back().end_col - 1 < min_gap_cols)
            merged.back().end_col = run.end_col;
        else
            merged.push_back(run);
    }

    std::vector<Beat> kept;
    for (const Beat& b : merged)
        if (b.width() >= min_width_cols) kept.push_back(b);
    return kept;
}

}  // namespace

int min_gap_cols_for(const Calibration& calib, double seconds) {
    return std::max(1, static_cast<int>(std::llround(seconds / calib.sec_per_col)));
}

int min_width_cols_for(const Calibration& calib, double seconds) {
    return std::max(1, static_cast<int>(std::llround(seconds / calib.sec_per_col)));
}

std::vector<Beat> extract_beats(const SegMask& mask, const Calibration& calib, int min_gap_cols,
                                int min_width_cols) {
    (void)calib;
    std::vector<Beat> beats = runs_for_direction(mask, FlowDirection::forward, min_gap_cols, min_width_cols);
    std::vector<Beat> rev = runs_for_direction(mask, FlowDirection::reverse, min_gap_cols, min_width_cols);
    beats.insert(beats.end(), rev.begin(), rev.end());
    std::stable_sort(beats.begin(), beats.end(), [](const Beat& a, const Beat& b) {
        return a.start_col != b.start_col ? a.start_col < b.start_col
                                          : static_cast<int>(a.direction) < static_cast<int>(b.direction);
    });
    return beats;
}

std::vector<Beat> extract_beats(const SegMask& mask, const Calibration& calib) {
    return extract_beats(mask, calib, min_gap_cols_for(calib), min_width_cols_for(calib));
}

double compute_vmax(const SegMask& mask, const Beat& beat, const Calibration& calib) {
    const std::uint8_t cls = class_for(beat.direction);
    long best = -1;
    for (int c = beat.start_col; c <= beat.end_col; ++c)
        for (int r = 0; r < mask.rows; ++r)
            if (mask.at(r, c) == cls) best = std::max(best, std::labs(r - calib.baseline_row));
    if (best < 0) throw ContractError("compute_vmax: beat contains no pixels of its class");
    return static_cast<double>(best) * calib.cmps_per_row;
}

double compute_vti(const SegMask& mask, const Beat& beat, const Calibration& calib) {
    const std::uint8_t cls = class_for(beat.direction);
    bool any = false;
    double sum_rows = 0.0;
    for (int c = beat.start_col; c <= beat.end_col; ++c) {
        long best = 0;
        for (int r = 0; r < mask.rows; ++r)
            if (mask.at(r, c) == cls) {
                best = std::max(best, std::labs(r - calib.baseline_row));
                any = true;
            }
        sum_rows += static_cast<double>(best);
    }
    if (!any) throw ContractError("compute_vti: beat contains no pixels of its class");
    return sum_rows * calib.cmps_per_row * calib.sec_per_col;
}

Measurement measure_beat(const SegMask& mask, const Beat& beat, const Calibration& calib) {
    return {beat, compute_vmax(mask, beat, calib), compute_vti(mask, beat, calib)};
}

std::vector<Measurement> measure_beats(const SegMask& mask, const std::vector<Beat>& beats,
                                       const Calibration& calib) {
    std::vector<Measurement> out;
    out.reserve(beats.size());
    for (const Beat& b : beats) out.push_back(measure_beat(mask, b, calib));
    return out;
}

std::vector<EDEvent> detect_ed(const std::vector<Beat>& beats, FlowType flow_type,
                               const Calibration& calib) {
    const EdRule rule = ed_rule_for(flow_type);
    const FlowDirection dir = (rule == EdRule::forward_end || rule == EdRule::forward_start)
                                  ? FlowDirection::forward
                                  : FlowDirection::reverse;
    const bool at_start = rule == EdRule::forward_start || rule == EdRule::reverse_start;

    std::vector<EDEvent> events;
    for (std::size_t i = 0; i < beats.size(); ++i) {
        if (beats[i].direction != dir) continue;
        EDEvent e;
        e.beat_index = static_cast<int>(i);
        if (at_start) {
            e.time = beats[i].start_col * calib.sec_per_col;
            e.rule = EdMarker::initiation;
        } else {
            e.time = (beats[i].end_col + 1) * calib.sec_per_col;
            e.rule = EdMarker::termination;
        }
        events.push_back(e);
    }
    return events;
}

}  // namespace dopplerkit
