// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>
#include <vector>

#include "fstrisk/dsl.hpp"

namespace fstrisk::testing {

/// True when the span names a real position: an existing line and a column
/// no further than one past that line's last code point.
inline bool span_in_bounds(std::string_view source, const SourceSpan& span) {
  std::vector<std::size_t> widths{0};
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto c = static_cast<unsigned char>(source[i]);
    if (c == '\n') {
      widths.push_back(0);
    } else if ((c & 0xC0) != 0x80) {
      ++widths.back();
    }
  }
  if (span.line < 1 || span.line > widths.size()) return false;
  return span.column >= 1 && span.column <= widths[span.line - 1] + 1;
}

}  // namespace fstrisk::testing
