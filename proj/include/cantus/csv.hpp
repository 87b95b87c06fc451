#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cantus::csv {

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view line, char sep = ',');
std::optional<double> parse_double(std::string_view s);

/// Non-empty, non-comment lines split into trimmed fields. A first row whose
/// leading field is not numeric is returned separately as the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
Table read(const std::filesystem::path& path);

/// Fixed-point formatting used for every numeric file output.
std::string fixed(double value, int decimals);

}  // namespace cantus::csv
