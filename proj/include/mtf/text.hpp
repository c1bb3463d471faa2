#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtf::text {

// Shortest round-trip form: parse_double(format_double(x)) == x for every finite x.
std::string format_double(double value);
void append_double(std::string& out, double value);

std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_int(std::string_view token);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

// Flat `key = value` lines; blank lines and lines starting with '#' are
// skipped. Throws std::invalid_argument naming the line on a malformed or
// repeated key.
std::map<std::string, std::string> read_config(std::istream& in);
void write_config(std::ostream& out, const std::map<std::string, std::string>& values);

}  // namespace mtf::text
