// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fstrisk::csv {

/// Splits one comma-separated record. Fields may be double-quoted; a doubled
/// quote inside a quoted field is a literal quote. Returns nullopt on an
/// unterminated quote.
std::optional<std::vector<std::string>> split_record(std::string_view line, char delimiter = ',');

/// Quotes a field when it contains the delimiter, a quote or a line break.
std::string quote(std::string_view field, char delimiter = ',');

/// Shortest decimal form that reads back to the same double.
std::string format_real(double value);

/// Strict full-string parse of a finite real.
std::optional<double> parse_real(std::string_view text);

std::string_view trim(std::string_view text) noexcept;

}  // namespace fstrisk::csv
