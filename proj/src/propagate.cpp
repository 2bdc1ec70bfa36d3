// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "fstrisk/errors.hpp"
#include "fstrisk/rng.hpp"

namespace fstrisk {
namespace {

constexpr double kMaxAttempts = 9223372036854775808.0;  // 2^63

struct Replicate {
  double loss = 0.0;
  double q = 0.0;
  bool aborted = false;
};

// Curve steps resolved to their posterior draws once per run.
struct PreparedStep {
  const StepSpec* spec;
  const std::vector<CurveParams>* draws = nullptr;
};

struct Prepared {
  std::vector<PreparedStep> steps;
  std::vector<std::vector<CurveParams>> pooled;
};

Prepared prepare(const CompiledModel& model) {
  Prepared prepared;
  prepared.pooled.reserve(model.scenario.steps.size());
  for (const auto& step : model.scenario.steps) {
    PreparedStep ps{&step};
    if (const auto* curve = std::get_if<CurveBinding>(&step.binding)) {
      prepared.pooled.push_back(model.curves.at(curve->curve_id)->pooled());
      ps.draws = &prepared.pooled.back();
    }
    prepared.steps.push_back(ps);
  }
  return prepared;
}

Replicate run_replicate(const Prepared& prepared, std::uint64_t seed, std::size_t index) {
  CounterRng rng(seed, stream_id(StreamDomain::replicate, index));
  double attempts = 1.0;
  double q = 1.0;
  const StepSpec* loss_step = nullptr;
  for (const auto& ps : prepared.steps) {
    const auto& step = *ps.spec;
    switch (step.kind) {
      case StepKind::count: attempts *= sample(std::get<DistributionExpr>(step.binding), rng); break;
      case StepKind::probability:
        if (ps.draws) {
          const auto& curve = std::get<CurveBinding>(step.binding);
          const auto& draw = (*ps.draws)[rng.index(ps.draws->size())];
          q *= curve_value(draw, curve.fst_minutes) * curve.access_probability;
        } else {
          q *= sample(std::get<DistributionExpr>(step.binding), rng);
        }
        break;
      case StepKind::loss: loss_step = &step; break;
    }
  }
  q = std::clamp(q, 0.0, 1.0);
  const double rounded = std::floor(attempts + 0.5);
  if (!(rounded < kMaxAttempts)) return {0.0, q, true};
  const auto total = static_cast<std::uint64_t>(std::max(rounded, 0.0));
  const std::uint64_t successes = rng.binomial(total, q);

  const auto& loss = std::get<DistributionExpr>(loss_step->binding);
  double amount = 0.0;
  if (loss.family == Family::point) {
    amount = static_cast<double>(successes) * loss.params[0];
  } else {
    for (std::uint64_t s = 0; s < successes; ++s) amount += sample(loss, rng);
  }
  return {amount, q, false};
}

const StepSpec& curve_step(const RiskScenario& scenario) {
  const StepSpec* found = nullptr;
  std::size_t count = 0;
  for (const auto& step : scenario.steps) {
    if (std::holds_alternative<CurveBinding>(step.binding)) {
      found = &step;
      ++count;
    }
  }
  if (count != 1) {
    throw InputError(fmt::format("uplift needs exactly one curve-bound step, found {}", count));
  }
  return *found;
}

}  // namespace

CompiledModel compile(RiskScenario scenario, CurveSources curves, std::size_t replicates, std::uint64_t seed) {
  auto checked = validate_scenario(std::move(scenario));
  if (!checked) throw InputError("invalid scenario:\n" + checked.error().to_string());
  if (replicates == 0) throw InputError("replicates must be at least 1");
  CompiledModel model{std::move(checked).value(), {}, replicates, seed};
  for (const auto& step : model.scenario.steps) {
    if (const auto* curve = std::get_if<CurveBinding>(&step.binding)) {
      const auto it = curves.find(curve->curve_id);
      if (it == curves.end() || !it->second) {
        throw InputError(fmt::format("step '{}' references unknown curve '{}'", step.id, curve->curve_id));
      }
      if (it->second->total_draws() == 0) {
        throw InputError(fmt::format("curve '{}' has no posterior draws", curve->curve_id));
      }
      model.curves.emplace(*it);
    }
  }
  return model;
}

double nearest_rank(std::vector<double> values, double level) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

RiskResult sample_annual_loss(const CompiledModel& model, Execution execution) {
  if (model.replicates == 0) throw InputError("replicates must be at least 1");
  const Prepared prepared = prepare(model);
  std::vector<Replicate> runs(model.replicates);
  const auto n = static_cast<std::ptrdiff_t>(model.replicates);
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) runs[r] = run_replicate(prepared, model.seed, static_cast<std::size_t>(r));
  } else {
    for (std::ptrdiff_t r = 0; r < n; ++r) runs[r] = run_replicate(prepared, model.seed, static_cast<std::size_t>(r));
  }

  RiskResult result;
  result.replicates = model.replicates;
  result.seed = model.seed;
  result.loss_samples.reserve(runs.size());
  double q_sum = 0.0;
  double loss_sum = 0.0;
  for (const auto& run : runs) {
    if (run.aborted) {
      ++result.aborted_replicates;
      continue;
    }
    result.loss_samples.push_back(run.loss);
    loss_sum += run.loss;
    q_sum += run.q;
  }
  if (result.loss_samples.empty()) {
    throw NumericalError("every replicate overflowed the 64-bit attempt count");
  }
  const auto kept = static_cast<double>(result.loss_samples.size());
  result.expected_loss = loss_sum / kept;
  result.success_prob_mean = q_sum / kept;
  for (double level : kReportLevels) result.quantiles.emplace_back(level, nearest_rank(result.loss_samples, level));
  return result;
}

double closed_form_expected_loss(const CompiledModel& model) {
  double counts = 1.0, probs = 1.0, loss = 0.0;
  for (const auto& step : model.scenario.steps) {
    double mean = 0.0;
    if (const auto* curve = std::get_if<CurveBinding>(&step.binding)) {
      mean = curve->access_probability * posterior_mean_curve(*model.curves.at(curve->curve_id), curve->fst_minutes);
    } else {
      mean = distribution_mean(std::get<DistributionExpr>(step.binding));
    }
    switch (step.kind) {
      case StepKind::count: counts *= mean; break;
      case StepKind::probability: probs *= mean; break;
      case StepKind::loss: loss = mean; break;
    }
  }
  return counts * probs * loss;
}

UpliftReport uplift(const CompiledModel& model, std::optional<double> fst_a, double fst_b, Execution execution) {
  const auto& target = curve_step(model.scenario);
  if (fst_a && !(*fst_a > 0.0)) throw InputError("uplift FST values must be positive");
  if (!(fst_b > 0.0)) throw InputError("uplift FST values must be positive");
  const auto& binding = std::get<CurveBinding>(target.binding);
  const auto& posterior = *model.curves.at(binding.curve_id);

  auto at_level = [&](std::optional<double> fst) {
    CompiledModel variant = model;
    for (auto& step : variant.scenario.steps) {
      if (step.id != target.id) continue;
      if (fst) {
        std::get<CurveBinding>(step.binding).fst_minutes = *fst;
      } else {
        step.binding = DistributionExpr::point(binding.access_probability * posterior.p0);
      }
    }
    const double p = binding.access_probability * (fst ? posterior_mean_curve(posterior, *fst) : posterior.p0);
    return std::pair{p, sample_annual_loss(variant, execution).expected_loss};
  };

  UpliftReport report;
  report.fst_a = fst_a;
  report.fst_b = fst_b;
  std::tie(report.p_a, report.expected_loss_a) = at_level(fst_a);
  std::tie(report.p_b, report.expected_loss_b) = at_level(fst_b);
  report.delta_pp = 100.0 * (report.p_b - report.p_a);
  return report;
}

void write_risk_result(std::ostream& out, const RiskResult& result, const UpliftReport* uplift_report) {
  nlohmann::ordered_json doc;
  doc["expected_loss"] = result.expected_loss;
  nlohmann::ordered_json quantiles = nlohmann::ordered_json::object();
  for (const auto& [level, value] : result.quantiles) quantiles[fmt::format("{}", level)] = value;
  doc["quantiles"] = quantiles;
  doc["success_prob_mean"] = result.success_prob_mean;
  doc["replicates"] = result.replicates;
  doc["seed"] = result.seed;
  doc["aborted_replicates"] = result.aborted_replicates;
  if (uplift_report) {
    nlohmann::ordered_json u;
    u["fst_a"] = uplift_report->fst_a ? nlohmann::ordered_json(*uplift_report->fst_a) : nlohmann::ordered_json("none");
    u["fst_b"] = uplift_report->fst_b;
    u["p_a"] = uplift_report->p_a;
    u["p_b"] = uplift_report->p_b;
    u["delta_pp"] = uplift_report->delta_pp;
    u["expected_loss_a"] = uplift_report->expected_loss_a;
    u["expected_loss_b"] = uplift_report->expected_loss_b;
    doc["uplift"] = u;
  }
  out << doc.dump(2) << '\n';
}

}  // namespace fstrisk
