#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skyloop {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
std::string join_doubles(std::initializer_list<double> values, char sep = ',');
std::string join_doubles(std::span<const double> values, char sep = ',');

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Parses one double, rejecting trailing garbage. Throws std::invalid_argument.
double parse_double(std::string_view s);
/// Comma-separated doubles.
std::vector<double> parse_doubles(std::string_view s, char sep = ',');

}  // namespace skyloop
