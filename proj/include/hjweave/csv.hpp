#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hjweave::csv {

/// Shortest decimal string that parses back to exactly the same double.
std::string format(double value);

/// Inverse of format(); throws InvalidInputError on malformed input.
double parse(std::string_view text);

/// Splits one CSV line on commas (no quoting; all our fields are numeric or
/// plain identifiers).
std::vector<std::string_view> split(std::string_view line);

}  // namespace hjweave::csv
