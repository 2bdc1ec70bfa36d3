// SPDX-License-Identifier: Apache-2.0
//
// Scenario definition language (.riskdsl):
//
//   file  := "scenario" STRING "{" step+ "}"
//   step  := "step" IDENT ":" kind "=" expr
//   kind  := "count" | "probability" | "loss"
//   expr  := IDENT "(" num ("," num)* ")"
//          | "curve" "(" IDENT "," "fst" "=" num ("," "access" "=" num)? ")"
//
// '#' starts a comment that runs to the end of the line. Numbers accept an
// optional sign, decimals and exponents.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fstrisk/expected.hpp"
#include "fstrisk/scenario.hpp"

namespace fstrisk {

/// 1-based line and column (columns count UTF-8 code points).
struct SourceSpan {
  std::size_t line = 1;
  std::size_t column = 1;
  std::size_t length = 0;

  bool operator==(const SourceSpan&) const = default;
};

struct ParseError {
  SourceSpan span;
  std::string message;
  std::vector<std::string> expected;

  /// "line:col: message (expected a, b)"
  std::string to_string() const;
};

/// Parses and validates. Only the first error is reported.
Expected<RiskScenario, ParseError> parse_scenario(std::string_view source);

/// Canonical text form; parse_scenario(format_scenario(s)) == s.
std::string format_scenario(const RiskScenario& scenario);

}  // namespace fstrisk
