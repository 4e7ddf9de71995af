#pragma once

#include <json.hpp>

#include "dopplerkit/doppler_types.hpp"
#include "dopplerkit/metrics.hpp"
#include "dopplerkit/network.hpp"
#include "dopplerkit/synth.hpp"

namespace dopplerkit {

// nlohmann adl serializers for the on-disk schemas. Object keys are emitted
// sorted, so dumps are deterministic.

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

void to_json(nlohmann::json& j, const Calibration& c);
void from_json(const nlohmann::json& j, Calibration& c);

void to_json(nlohmann::json& j, const Beat& b);
void from_json(const nlohmann::json& j, Beat& b);

void to_json(nlohmann::json& j, const Measurement& m);
void from_json(const nlohmann::json& j, Measurement& m);

void to_json(nlohmann::json& j, const SplitPlan& p);
void from_json(const nlohmann::json& j, SplitPlan& p);

/// Case sidecar: calibration, flow type, generator parameters, and the full
/// ground truth (beats, measurements, ED times).
nlohmann::json sidecar_json(const SynthCase& c);
void sidecar_from_json(const nlohmann::json& j, SynthCase& c);

}  // namespace dopplerkit
