// SPDX-License-Identifier: Apache-2.0
//
// Bayesian fit of the FST -> probability curve.
//
// Sampling happens in an unconstrained space with p0 held at the elicited
// baseline:
//
//   rise  = logit((pmax - p0) / (1 - p0))   prior N(0, 1.5^2)
//   lslope = ln(slope)                       prior N(0, 1)
//   midpoint                                 prior N(ln 120, 1.5^2)
//
// Each aggregate point contributes a Normal log-density of its mean at the
// curve value, with sd = max(se, noise_floor), so tasks where experts
// disagree pull on the curve less.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fstrisk/curve.hpp"
#include "fstrisk/elicitation.hpp"
#include "fstrisk/execution.hpp"

namespace fstrisk {

inline constexpr std::uint64_t kDefaultSeed = 20241031;

struct McmcConfig {
  std::size_t chains = 4;
  std::size_t warmup = 2000;
  std::size_t draws = 8000;
  std::uint64_t seed = kDefaultSeed;
  double noise_floor = 0.02;
  double target_accept = 0.30;

  /// Throws InputError on an invalid configuration.
  void validate() const;
};

struct PriorSpec {
  double rise_mean = 0.0;
  double rise_sd = 1.5;
  double lslope_mean = 0.0;
  double lslope_sd = 1.0;
  double midpoint_mean = 4.787491742782046;  // ln 120
  double midpoint_sd = 1.5;
};

inline constexpr PriorSpec kDefaultPrior{};

using Unconstrained = std::array<double, 3>;

Unconstrained to_unconstrained(const CurveParams& params);
CurveParams from_unconstrained(const Unconstrained& u, double p0);

/// Sum of Normal log-densities of the points about the curve.
double log_likelihood(const CurveParams& params, std::span<const AggregatePoint> points, double noise_floor);

/// Log prior on the unconstrained coordinates; -inf outside the support.
double log_prior(const CurveParams& params, const PriorSpec& prior = kDefaultPrior);

/// log_likelihood + log_prior, or -inf for invalid parameters.
double log_posterior(const CurveParams& params, std::span<const AggregatePoint> points, const McmcConfig& config);

struct PosteriorSamples {
  double p0 = 0.25;
  std::vector<std::vector<CurveParams>> chains;
  std::vector<double> acceptance_rate;  // empty when read back from a file
  McmcConfig config;

  std::size_t total_draws() const noexcept;
  /// All draws in chain order.
  std::vector<CurveParams> pooled() const;
};

/// Per-chain random-walk Metropolis. Chain c draws from the Philox stream
/// (seed, mcmc_chain:c) and starts at the prior medians plus 0.5 * N(0, 1)
/// jitter from (seed, chain_init:c). Results do not depend on `execution`.
PosteriorSamples fit_curve(std::span<const AggregatePoint> points, double baseline_p, const McmcConfig& config,
                           Execution execution = Execution::parallel);

struct ParameterDiagnostic {
  std::optional<double> rhat;  // unavailable with a single chain
  double ess = 0.0;
  bool degenerate = false;     // zero within-chain variance
};

/// Split-chain R-hat and multi-chain ESS (Geyer initial positive sequence)
/// for one scalar quantity.
ParameterDiagnostic diagnose(const std::vector<std::vector<double>>& chains);

struct Diagnostics {
  static constexpr std::array<std::string_view, 3> kNames{"pmax", "slope", "midpoint"};
  std::array<ParameterDiagnostic, 3> params;

  bool rhat_available() const noexcept { return params[0].rhat.has_value(); }
  double max_rhat() const noexcept;
  double min_ess() const noexcept;
};

Diagnostics diagnostics(const PosteriorSamples& samples);

struct CurveBand {
  double fst_minutes;
  double mean;
  double lo;
  double hi;
};

struct CurveSummary {
  std::vector<CurveBand> grid;
  double credible_level = 0.90;
};

/// Pooled posterior curve values at each grid point: mean and equal-tailed
/// quantiles at (1 -+ level) / 2.
CurveSummary summarize_curve(const PosteriorSamples& samples, std::span<const double> grid_fst,
                             double credible_level = 0.90, Execution execution = Execution::parallel);

/// Posterior mean of the curve at one FST.
double posterior_mean_curve(const PosteriorSamples& samples, double fst_minutes);

/// `n` points log-spaced over [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t n);

// File formats.
void write_posterior(std::ostream& out, const PosteriorSamples& samples);
PosteriorSamples read_posterior(std::istream& in, std::string_view origin = "<stream>");
PosteriorSamples load_posterior(const std::filesystem::path& path);

void write_curve_summary(std::ostream& out, const CurveSummary& summary);
CurveSummary read_curve_summary(std::istream& in, std::string_view origin = "<stream>");

}  // namespace fstrisk
