#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "dopplerkit/doppler_types.hpp"

namespace dopplerkit {

/// Analytic envelope primitive. Lobes of one case never overlap in time, so
/// the signed envelope is the sum of the active lobe values.
struct Lobe {
    double t0 = 0.0;       // seconds, inclusive start
    double t1 = 0.0;       // seconds, exclusive end
    double peak = 0.0;     // cm/s, positive
    int polarity = +1;     // +1 forward (above baseline), -1 reverse
    bool half_sine = true; // false: symmetric triangle

    double width() const { return t1 - t0; }
    /// Closed-form area of |v| over the lobe: half-sine 2*peak*width/pi,
    /// triangle peak*width/2.
    double area() const;
    double value_at(double t) const;  // signed cm/s, 0 outside [t0, t1)
    /// Exact maximum of |v| over [a, b] (unimodal shape, clamped apex).
    double max_abs_in(double a, double b) const;
};

struct CaseSpec {
    FlowType flow_type = FlowType::AV_INFLOW;
    double heart_rate = 75.0;    // beats/min, [30, 180]
    int n_beats = 2;             // rendered cardiac cycles
    double peak_velocity = 100;  // cm/s, maximum of the envelope
    double noise_level = 0.0;    // [0, 1]
    int rows = 64;
    int cols = 128;
    Calibration calibration;
    std::uint64_t seed = 0;

    double record_seconds() const { return cols * calibration.sec_per_col; }
    double period_seconds() const { return 60.0 / heart_rate; }
};

struct SynthCase {
    std::vector<std::uint8_t> image;  // rows*cols grayscale, row-major
    SegMask gt_mask;
    std::vector<Beat> gt_beats;
    std::vector<Measurement> gt_measurements;  // analytic, not rasterized
    std::vector<double> gt_ed_times;           // seconds
    Calibration calibration;
    FlowType flow_type = FlowType::AV_INFLOW;
    CaseSpec spec;
};

/// Relative lobe geometry of one flow type (fractions of the cardiac period)
/// plus its simulation parameter ranges.
struct FlowTypeProfile {
    std::vector<Lobe> lobes;  // t0/t1 hold period fractions, peak holds a multiplier
    double ed_frac = 0.0;     // ED anchor as a period fraction
    double hr_lo = 45, hr_hi = 140;
    double velocity_lo = 50, velocity_hi = 130;
    bool narrow_band = false;  // render brightness concentrated at the envelope edge
};

const FlowTypeProfile& flow_type_profile(FlowType type);

/// Concrete lobes of a case in absolute seconds, cycles centered in the record.
std::vector<Lobe> case_lobes(const CaseSpec& spec);

/// Signed envelope velocity in cm/s at time t.
double envelope_velocity(const CaseSpec& spec, double t);

/// Per-column signed envelope: the exact peak magnitude of v over each
/// column's time span, signed by the dominating lobe's polarity. Using the
/// span maximum (not a point sample) keeps the rasterized Vmax within one
/// cmps_per_row of the analytic peak.
std::vector<double> envelope_signal(const CaseSpec& spec);

void validate_case_spec(const CaseSpec& spec);  // throws ConfigError

/// Mask with per-column extent round(|v| / cmps_per_row) away from the
/// baseline row, classed by envelope sign.
SegMask rasterize_mask(const CaseSpec& spec, const std::vector<double>& env);

/// Rendered spectrogram: bright fill whose outermost pixel carries the
/// envelope's sub-pixel coverage, multiplicative speckle in
/// [1 - 0.5*noise_level, 1], additive background noise scaled by noise_level.
/// Both noise fields are pure functions of (seed, row, col).
std::vector<std::uint8_t> render_spectrogram(const CaseSpec& spec, const std::vector<double>& env);

SynthCase generate_case(const CaseSpec& spec);

/// Translate image, mask, and baseline_row by delta_rows (positive moves
/// content down). Vacated rows are refilled from the case's per-pixel noise
/// streams; ground-truth measurements are baseline-relative and unchanged.
/// Throws ContractError when the shift would clip the envelope.
SynthCase apply_baseline_shift(const SynthCase& c, int delta_rows);

struct DatasetConfig {
    int n_cases = 100;
    std::map<FlowType, double> type_mix;  // empty = uniform over all seven types
    std::uint64_t seed = 0;
    int rows = 64;
    int cols = 128;
    double record_seconds = 2.0;
    double noise_lo = 0.2;
    double noise_hi = 0.7;
    int max_abs_shift_rows = 0;  // keep envelopes shiftable by this many rows
};

/// Deterministic dataset: largest-remainder type apportionment, one derived
/// seed per case. Throws ConfigError on an empty or non-normalized mix.
std::vector<SynthCase> make_dataset(const DatasetConfig& config);

/// Case parameters drawn for make_dataset; exposed so datasets can be
/// regenerated case-by-case (workers) and audited by tests.
CaseSpec dataset_case_spec(const DatasetConfig& config, FlowType type, std::uint64_t case_seed);

/// The per-case type assignment used by make_dataset.
std::vector<FlowType> dataset_type_assignment(const DatasetConfig& config);

}  // namespace dopplerkit
