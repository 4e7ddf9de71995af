#pragma once

#include <vector>

#include "dopplerkit/doppler_types.hpp"

namespace dopplerkit {

/// Default beat-grouping thresholds, expressed in time and converted to
/// columns through the calibration.
inline constexpr double kDefaultMinGapSeconds = 0.060;
inline constexpr double kDefaultMinWidthSeconds = 0.040;

int min_gap_cols_for(const Calibration& calib, double seconds = kDefaultMinGapSeconds);
int min_width_cols_for(const Calibration& calib, double seconds = kDefaultMinWidthSeconds);

/// Group mask columns into beats, per flow direction: columns holding at
/// least one pixel of the class form runs; runs separated by fewer than
/// min_gap_cols background columns merge; runs narrower than min_width_cols
/// are dropped. Result is sorted by start column.
std::vector<Beat> extract_beats(const SegMask& mask, const Calibration& calib, int min_gap_cols,
                                int min_width_cols);
std::vector<Beat> extract_beats(const SegMask& mask, const Calibration& calib);

/// Peak velocity: greatest pixel distance from the baseline row within the
/// beat, scaled to cm/s. Throws ContractError if the beat holds no pixels.
double compute_vmax(const SegMask& mask, const Beat& beat, const Calibration& calib);

/// Velocity-time integral: per-column greatest distance from baseline summed
/// over the beat, scaled to cm. Columns without class pixels contribute zero.
double compute_vti(const SegMask& mask, const Beat& beat, const Calibration& calib);

Measurement measure_beat(const SegMask& mask, const Beat& beat, const Calibration& calib);
std::vector<Measurement> measure_beats(const SegMask& mask, const std::vector<Beat>& beats,
                                       const Calibration& calib);

/// Apply the flow type's ED rule to the beat list. Flow initiation rules
/// anchor at start_col * sec_per_col, termination rules at
/// (end_col + 1) * sec_per_col. For VAR_REGURG the termination rule carries a
/// known positive bias: regurgitant V-Ar flow outlasts end-diastole, so the
/// reported time trails the physiological event; no correction is applied.
std::vector<EDEvent> detect_ed(const std::vector<Beat>& beats, FlowType flow_type,
                               const Calibration& calib);

}  // namespace dopplerkit
