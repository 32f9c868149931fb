#pragma once

#include <string>
#include <string_view>

namespace aggflow {

/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

/// Strict full-string parse; throws std::invalid_argument naming `what`.
double parse_double(std::string_view s, std::string_view what = "value");
long parse_integer(std::string_view s, std::string_view what = "value");

std::string_view trim(std::string_view s);

}  // namespace aggflow
