#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dopplerkit {

/// Physical scaling of a spectrogram image. Velocities are measured relative
/// to baseline_row: rows above it are forward flow, rows below reverse.
struct Calibration {
    double sec_per_col = 0.0;   // seconds per pixel column
    double cmps_per_row = 0.0;  // (cm/s) per pixel row
    int baseline_row = 0;       // row index of zero velocity
};

/// Seven-way Doppler flow taxonomy keyed by valve position and flow direction.
enum class FlowType {
    AV_INFLOW,     // anterograde A-V inflow, E/A double lobe
    AV_REGURG,     // retrograde A-V flow, long systolic lobe
    VAR_EJECTION,  // anterograde V-Ar ejection, systolic lobe
    VAR_REGURG,    // retrograde V-Ar flow, prolonged diastolic decay
    TDI_ANNULUS,   // triphasic tissue velocities s'/e'/a'
    VENOUS_PW,     // low-velocity multiphasic venous flow
    OUTFLOW_PW,    // pulsed-wave ejection with a narrow spectral band
};

inline constexpr int kNumFlowTypes = 7;

const std::vector<FlowType>& all_flow_types();
std::string flow_type_name(FlowType type);
FlowType flow_type_from_name(const std::string& name);  // throws DataError

enum class FlowDirection { forward, reverse };

std::string direction_name(FlowDirection dir);
FlowDirection direction_from_name(const std::string& name);  // throws DataError

/// Per-pixel class labels: 0 background, 1 forward flow, 2 reverse flow.
struct SegMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> labels;  // rows * cols, row-major

    std::uint8_t at(int r, int c) const { return labels[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t& at(int r, int c) { return labels[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const SegMask&) const = default;
};

inline constexpr std::uint8_t kClassBackground = 0;
inline constexpr std::uint8_t kClassForward = 1;
inline constexpr std::uint8_t kClassReverse = 2;

SegMask make_mask(int rows, int cols);

/// Contiguous flow interval of one cardiac beat, inclusive column range.
struct Beat {
    int start_col = 0;
    int end_col = 0;
    FlowDirection direction = FlowDirection::forward;

    int width() const { return end_col - start_col + 1; }
    bool operator==(const Beat&) const = default;
};

struct Measurement {
    Beat beat;
    double vmax = 0.0;  // cm/s
    double vti = 0.0;   // cm
};

/// Which envelope boundary of which flow direction marks end-diastole.
enum class EdRule {
    forward_end,    // termination of anterograde flow (A-V valve closure)
    forward_start,  // initiation of anterograde flow (V-Ar ejection onset)
    reverse_start,  // initiation of retrograde A-V flow
    reverse_end,    // termination of retrograde V-Ar flow (biased late)
};

EdRule ed_rule_for(FlowType type);

/// Initiation/termination tag carried by an ED event.
enum class EdMarker { initiation, termination };

struct EDEvent {
    double time = 0.0;  // seconds from the left image edge
    EdMarker rule = EdMarker::termination;
    int beat_index = -1;  // index into the beat list the event was derived from
};

}  // namespace dopplerkit
