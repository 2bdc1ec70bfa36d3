// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo propagation of a risk scenario to annual loss.
//
// Replicate r draws from the Philox stream (seed, replicate:r):
//   1. each count step in order; T = floor(product + 0.5)
//   2. each probability step in order: a distribution draw, or for a curve
//      step a uniformly chosen posterior draw evaluated at the bound FST
//      times access_probability; q = clamp(product, 0, 1)
//   3. S ~ Binomial(T, q)
//   4. loss = S * x for point losses, otherwise the sum of S loss draws
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fstrisk/execution.hpp"
#include "fstrisk/inference.hpp"
#include "fstrisk/scenario.hpp"

namespace fstrisk {

using CurveSources = std::map<std::string, std::shared_ptr<const PosteriorSamples>>;

struct CompiledModel {
  RiskScenario scenario;
  CurveSources curves;
  std::size_t replicates = 100000;
  std::uint64_t seed = kDefaultSeed;
};

/// Validates the scenario and resolves every curve reference. Throws
/// InputError.
CompiledModel compile(RiskScenario scenario, CurveSources curves, std::size_t replicates = 100000,
                      std::uint64_t seed = kDefaultSeed);

inline constexpr double kReportLevels[] = {0.05, 0.25, 0.5, 0.75, 0.95};

struct RiskResult {
  std::vector<double> loss_samples;  // replicate order, aborted replicates dropped
  double expected_loss = 0.0;
  std::vector<std::pair<double, double>> quantiles;  // (level, value), nearest rank
  double success_prob_mean = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t aborted_replicates = 0;  // attempt count overflowed 2^63

  bool operator==(const RiskResult&) const = default;
};

RiskResult sample_annual_loss(const CompiledModel& model, Execution execution = Execution::parallel);

/// Product of step means under independence; curve steps use the posterior
/// mean curve times access probability.
double closed_form_expected_loss(const CompiledModel& model);

/// Nearest-rank quantile of unsorted data.
double nearest_rank(std::vector<double> values, double level);

struct UpliftReport {
  std::optional<double> fst_a;  // nullopt: no-LLM baseline
  double fst_b = 0.0;
  double p_a = 0.0;
  double p_b = 0.0;
  double delta_pp = 0.0;
  double expected_loss_a = 0.0;
  double expected_loss_b = 0.0;
};

/// Compares the single curve-bound step at two capability levels with every
/// other step and the seed held fixed. Throws InputError unless exactly one
/// curve-bound step exists.
UpliftReport uplift(const CompiledModel& model, std::optional<double> fst_a, double fst_b,
                    Execution execution = Execution::parallel);

/// JSON document with expected_loss, quantiles, success_prob_mean,
/// replicates, seed, aborted_replicates and optionally uplift.
void write_risk_result(std::ostream& out, const RiskResult& result, const UpliftReport* uplift_report = nullptr);

}  // namespace fstrisk
