#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dopplerkit/metrics.hpp"
#include "dopplerkit/synth.hpp"

namespace dopplerkit {

/// Zero-padded case stem, e.g. case_0007.
std::string case_basename(int index);

/// Per-case files: <stem>.pgm (spectrogram), <stem>.mask.pgm (class labels as
/// pixel values), <stem>.json (calibration + ground truth sidecar). The
/// directory additionally holds manifest.json and splits.json. On failure all
/// files written so far are removed.
void write_dataset(const std::filesystem::path& dir, const std::vector<SynthCase>& cases,
                   const SplitPlan& splits, const nlohmann::json& generator_config,
                   int workers = 1);

SynthCase read_case(const std::filesystem::path& dir, int index);  // throws DataError

/// All cases listed by the manifest, in index order.
std::vector<SynthCase> read_dataset(const std::filesystem::path& dir, int workers = 1);

/// The subset with the given indices, in the given order.
std::vector<SynthCase> read_cases(const std::filesystem::path& dir, const std::vector<int>& indices,
                                  int workers = 1);

nlohmann::json read_manifest(const std::filesystem::path& dir);
SplitPlan read_splits(const std::filesystem::path& dir);

}  // namespace dopplerkit
