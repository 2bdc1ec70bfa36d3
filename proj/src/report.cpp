// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/report.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fstrisk/errors.hpp"

namespace fstrisk {
namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 770.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 440.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

class Frame {
 public:
  Frame(double lo, double hi) : log_lo_(std::log10(lo)), log_hi_(std::log10(hi)) {}

  double x(double fst) const { return kLeft + (std::log10(fst) - log_lo_) / (log_hi_ - log_lo_) * (kRight - kLeft); }
  double y(double p) const { return kBottom - p * (kBottom - kTop); }
  bool contains(double fst) const {
    const double l = std::log10(fst);
    return l >= log_lo_ - 1e-12 && l <= log_hi_ + 1e-12;
  }

 private:
  double log_lo_;
  double log_hi_;
};

std::string num(double v) {
  // Avoid "-0.00".
  const double r = std::round(v * 100.0) / 100.0;
  return fmt::format("{:.2f}", r == 0.0 ? 0.0 : r);
}

std::string tick_label(double fst) {
  return fst >= 1.0 ? fmt::format("{:.0f}", fst) : fmt::format("{}", fst);
}

}  // namespace

void ReportConfig::validate() const {
  if (!(grid_min_fst > 0.0)) throw InputError("grid minimum must be positive");
  if (!(grid_min_fst < grid_max_fst)) throw InputError("grid minimum must be below grid maximum");
  if (grid_points == 0) throw InputError("grid needs at least one point");
  if (!(credible_level > 0.0 && credible_level < 1.0)) throw InputError("credible level must lie in (0, 1)");
  for (const auto& m : reference_markers) {
    if (!(m.fst_minutes > 0.0)) throw InputError("reference markers need a positive FST");
  }
}

std::vector<double> ReportConfig::grid() const { return log_grid(grid_min_fst, grid_max_fst, grid_points); }

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        if (static_cast<unsigned char>(c) >= 0x20 || c == '\t') out.push_back(c);
    }
  }
  return out;
}

std::string render_curve_svg(const std::vector<CurveSeries>& series, const ReportConfig& config, double baseline_p) {
  config.validate();
  if (series.empty()) throw InputError("curve plot needs at least one series");
  const Frame frame(config.grid_min_fst, config.grid_max_fst);
  std::string svg;
  auto line = [&](std::string s) {
    svg += s;
    svg += '\n';
  };

  line(R"(<?xml version="1.0" encoding="UTF-8"?>)");
  line(fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {:.0f} {:.0f}" width="{:.0f}" height="{:.0f}" font-family="sans-serif" font-size="12">)",
                   kWidth, kHeight, kWidth, kHeight));
  line("<title>Success probability versus first solve time</title>");
  line(fmt::format(R"(<rect id="background" x="0" y="0" width="{:.0f}" height="{:.0f}" fill="#ffffff"/>)", kWidth, kHeight));

  // Axes.
  line(R"(<g id="axes" stroke="#333333" fill="#333333">)");
  line(fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}"/>)", num(kLeft), num(kBottom), num(kRight), num(kBottom)));
  line(fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}"/>)", num(kLeft), num(kBottom), num(kLeft), num(kTop)));
  for (int e = -3; e <= 6; ++e) {
    const double fst = std::pow(10.0, e);
    if (!frame.contains(fst)) continue;
    const double x = frame.x(fst);
    line(fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}"/>)", num(x), num(kBottom), num(x), num(kBottom + 6)));
    line(fmt::format(R"(<text x="{}" y="{}" text-anchor="middle" stroke="none">{}</text>)", num(x), num(kBottom + 20),
                     tick_label(fst)));
  }
  for (int i = 0; i <= 5; ++i) {
    const double p = 0.2 * i;
    const double y = frame.y(p);
    line(fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}"/>)", num(kLeft - 6), num(y), num(kLeft), num(y)));
    line(fmt::format(R"(<text x="{}" y="{}" text-anchor="end" stroke="none">{:.1f}</text>)", num(kLeft - 10),
                     num(y + 4), p));
  }
  line(fmt::format(R"(<text x="{}" y="{}" text-anchor="middle" stroke="none">First solve time (minutes, log scale)</text>)",
                   num(0.5 * (kLeft + kRight)), num(kBottom + 45)));
  line(fmt::format(R"svg(<text x="{}" y="{}" text-anchor="middle" stroke="none" transform="rotate(-90 {} {})">Probability of success</text>)svg",
                   num(20), num(0.5 * (kTop + kBottom)), num(20), num(0.5 * (kTop + kBottom))));
  line("</g>");

  line(R"(<g id="bands">)");
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (!series[s].show_band || series[s].summary.grid.empty()) continue;
    std::string points;
    for (const auto& row : series[s].summary.grid) points += fmt::format("{},{} ", num(frame.x(row.fst_minutes)), num(frame.y(row.hi)));
    for (auto it = series[s].summary.grid.rbegin(); it != series[s].summary.grid.rend(); ++it) {
      points += fmt::format("{},{} ", num(frame.x(it->fst_minutes)), num(frame.y(it->lo)));
    }
    points.pop_back();
    line(fmt::format(R"(<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>)", points,
                     kPalette[s % std::size(kPalette)]));
  }
  line("</g>");

  line(R"(<g id="means" fill="none" stroke-width="2">)");
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::string points;
    for (const auto& row : series[s].summary.grid) points += fmt::format("{},{} ", num(frame.x(row.fst_minutes)), num(frame.y(row.mean)));
    if (!points.empty()) points.pop_back();
    line(fmt::format(R"(<polyline points="{}" stroke="{}"/>)", points, kPalette[s % std::size(kPalette)]));
  }
  line("</g>");

  const double by = frame.y(baseline_p);
  line(R"(<g id="baseline" stroke="#555555" stroke-dasharray="6 4">)");
  line(fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}"/>)", num(kLeft), num(by), num(kRight), num(by)));
  line(fmt::format(R"(<text x="{}" y="{}" text-anchor="end" stroke="none" fill="#555555">baseline</text>)", num(kRight - 4),
                   num(by - 6)));
  line("</g>");

  line(R"(<g id="markers" stroke="#888888" stroke-dasharray="2 3">)");
  for (const auto& marker : config.reference_markers) {
    if (!frame.contains(marker.fst_minutes)) continue;
    const double x = frame.x(marker.fst_minutes);
    line(fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}"/>)", num(x), num(kBottom), num(x), num(kTop)));
    line(fmt::format(R"(<text x="{}" y="{}" text-anchor="start" stroke="none" fill="#444444">{}</text>)", num(x + 4),
                     num(kTop + 14), xml_escape(marker.label)));
  }
  line("</g>");

  line(R"(<g id="legend">)");
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = kTop + 30 + 18 * static_cast<double>(s);
    const char* color = kPalette[s % std::size(kPalette)];
    line(fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>)", num(kLeft + 12), num(y),
                     num(kLeft + 36), num(y), color));
    std::string label = xml_escape(series[s].label);
    if (series[s].show_band) label += fmt::format(" ({:.0f}% band)", 100.0 * series[s].summary.credible_level);
    line(fmt::format(R"(<text x="{}" y="{}" fill="#222222">{}</text>)", num(kLeft + 42), num(y + 4), label));
  }
  line("</g>");
  line("</svg>");
  return svg;
}

}  // namespace fstrisk
