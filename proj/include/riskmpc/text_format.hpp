#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace riskmpc {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Strict full-field parse; throws std::invalid_argument on garbage.
double parse_double(std::string_view field);
long long parse_int(std::string_view field);

std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace riskmpc
