// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "fstrisk/inference.hpp"

namespace fstrisk {

struct ReferenceMarker {
  std::string label;
  double fst_minutes = 0.0;
};

struct ReportConfig {
  double grid_min_fst = 1.0;
  double grid_max_fst = 400.0;
  std::size_t grid_points = 200;
  double credible_level = 0.90;
  std::vector<ReferenceMarker> reference_markers{{"o1 / Claude 3.5 Sonnet / GPT-4o", 32.0}};

  /// Throws InputError.
  void validate() const;
  std::vector<double> grid() const;
};

struct CurveSeries {
  std::string label;
  CurveSummary summary;
  bool show_band = true;
};

/// Standalone SVG (800x500 viewBox, no external references). Layout:
///   <rect id="background">, <g id="axes">, <g id="bands">, <g id="means">,
///   <g id="baseline">, <g id="markers">, <g id="legend">
/// The x axis is log-scaled over the config's grid range, y spans [0, 1].
std::string render_curve_svg(const std::vector<CurveSeries>& series, const ReportConfig& config, double baseline_p);

std::string xml_escape(std::string_view text);

}  // namespace fstrisk
