#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace voi_twin::csv {

// Shortest string that round-trips to the same double.
std::string format_double(double v);

std::vector<std::string> split(std::string_view line, char sep = ',');

double parse_double(std::string_view field);
int parse_int(std::string_view field);

}  // namespace voi_twin::csv
