#pragma once

#include <filesystem>

#include "dopplerkit/network.hpp"

namespace dopplerkit {

/// Checkpoint layout: a text header (format tag + version, then the network
/// config as a single JSON line, then the parameter scalar count) followed by
/// the raw little-endian 64-bit float blob of every parameter in fixed layer
/// order. Write -> read -> write is byte-identical.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

Model load_checkpoint(const std::filesystem::path& path);  // throws DataError

}  // namespace dopplerkit
