#pragma once

#include <string>
#include <vector>

namespace dopplerkit {

/// Locale-independent float formatting with 17 significant digits; parses
/// back to the identical double.
std::string format_double(double v);

/// Locale-independent parse; throws DataError on malformed input.
double parse_double(const std::string& s);

std::vector<std::string> split_csv_line(const std::string& line);
std::string join_csv(const std::vector<std::string>& fields);

}  // namespace dopplerkit
