#include "changeblind/csv.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "changeblind/error.hpp"

namespace changeblind::csv {

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.find('"') != std::string_view::npos) {
    throw ValidationError("quoted CSV fields are not supported");
  }
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& field, std::string_view column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v)) {
    throw ValidationError("column '" + std::string(column) + "': '" + field +
                          "' is not a finite number");
  }
  return v;
}

std::optional<double> parse_optional_double(const std::string& field, std::string_view column) {
  if (field.empty()) return std::nullopt;
  return parse_double(field, column);
}

long parse_long(const std::string& field, std::string_view column) {
  long v = 0;
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(field.data(), last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw ValidationError("column '" + std::string(column) + "': '" + field +
                          "' is not an integer");
  }
  return v;
}

bool valid_identifier(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace changeblind::csv
