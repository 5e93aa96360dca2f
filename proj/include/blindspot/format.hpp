#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace blindspot {

// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

// Minimal RFC 4180 CSV support: fields containing separators, quotes or
// newlines are quoted on write; quoted fields are honored on read.
std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace blindspot
