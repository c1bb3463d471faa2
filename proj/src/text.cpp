#include "mtf/text.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <system_error>

namespace mtf::text {

void append_double(std::string& out, double value) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) {
    out += "nan";
    return;
  }
  out.append(buf, end);
}

std::string format_double(double value) {
  std::string s;
  append_double(s, value);
  return s;
}

std::optional<double> parse_double(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  return value;
}

std::optional<long long> parse_int(std::string_view token) {
  token = trim(token);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      break;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> read_config(std::istream& in) {
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    const auto key = eq == std::string_view::npos ? std::string_view{} : trim(body.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key = value");
    if (!values.emplace(std::string(key), std::string(trim(body.substr(eq + 1)))).second)
      throw std::invalid_argument("config line " + std::to_string(number) + ": repeated key " + std::string(key));
  }
  return values;
}

void write_config(std::ostream& out, const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) out << k << " = " << v << '\n';
}

}  // namespace mtf::text
