// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

namespace fstrisk {

/// Monotone saturating curve in log-minutes:
///
///   p(fst) = p0 + (pmax - p0) * logistic(slope * (ln fst - midpoint))
struct CurveParams {
  double p0 = 0.25;
  double pmax = 0.5;
  double slope = 1.0;
  double midpoint = 0.0;

  bool valid() const noexcept {
    return 0.0 < p0 && p0 < pmax && pmax < 1.0 && slope > 0.0 && std::isfinite(slope) && std::isfinite(midpoint);
  }

  bool operator==(const CurveParams&) const = default;
};

inline double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double curve_value(const CurveParams& params, double fst_minutes) noexcept {
  return params.p0 + (params.pmax - params.p0) * logistic(params.slope * (std::log(fst_minutes) - params.midpoint));
}

}  // namespace fstrisk
