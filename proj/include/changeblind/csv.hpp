#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace changeblind::csv {

// Minimal CSV for the project's own flat tables: identifiers are restricted
// to [A-Za-z0-9_.-], so fields never need quoting.

std::vector<std::string> split_line(std::string_view line);

/// Shortest representation that round-trips through strtod.
std::string format_double(double v);

double parse_double(const std::string& field, std::string_view column);
std::optional<double> parse_optional_double(const std::string& field, std::string_view column);
long parse_long(const std::string& field, std::string_view column);

/// True when the identifier is non-empty and uses only [A-Za-z0-9_.-].
bool valid_identifier(std::string_view id);

}  // namespace changeblind::csv
