#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dopplerkit {

struct PgmImage {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    bool operator==(const PgmImage&) const = default;
};

/// Canonical binary P5 encoding: "P5\n<cols> <rows>\n255\n" + raw bytes.
std::vector<std::uint8_t> encode_pgm(const PgmImage& img);

/// Parses binary P5 with optional comments and maxval <= 255.
/// Throws DataError on malformed input.
PgmImage decode_pgm(const std::vector<std::uint8_t>& bytes);

void write_pgm(const std::filesystem::path& path, const PgmImage& img);
PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace dopplerkit
