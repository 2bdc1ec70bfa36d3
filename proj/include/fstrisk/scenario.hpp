// SPDX-License-Identifier: Apache-2.0
//
// Risk-scenario data model: a flat chain of count, probability and loss
// steps. Expected annual loss under independence is
//
//     (product of count means) * (product of probability means) * loss mean
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fstrisk/expected.hpp"

namespace fstrisk {

class CounterRng;

enum class Family { point, uniform, triangular, lognormal, beta };

std::string_view family_name(Family family) noexcept;
std::optional<Family> family_from_name(std::string_view name) noexcept;
std::size_t family_arity(Family family) noexcept;

/// A closed-form distribution. Parameters by family:
/// point(x), uniform(a, b), triangular(a, mode, b), lognormal(mu, sigma),
/// beta(alpha, beta).
struct DistributionExpr {
  Family family = Family::point;
  std::vector<double> params;

  static DistributionExpr point(double x) { return {Family::point, {x}}; }
  static DistributionExpr uniform(double a, double b) { return {Family::uniform, {a, b}}; }

  bool operator==(const DistributionExpr&) const = default;
};

struct Support {
  double lo;
  double hi;
};

/// Empty when the parameters satisfy the family's invariants.
std::vector<std::string> distribution_problems(const DistributionExpr& expr);

/// Closed interval containing every value the distribution can produce.
Support distribution_support(const DistributionExpr& expr);

double distribution_mean(const DistributionExpr& expr);

double sample(const DistributionExpr& expr, CounterRng& rng);

/// Binds a probability step to a fitted curve evaluated at one capability
/// level, scaled by the probability of obtaining that capability at all.
struct CurveBinding {
  std::string curve_id;
  double fst_minutes = 1.0;
  double access_probability = 1.0;

  bool operator==(const CurveBinding&) const = default;
};

enum class StepKind { count, probability, loss };

std::string_view step_kind_name(StepKind kind) noexcept;
std::optional<StepKind> step_kind_from_name(std::string_view name) noexcept;

using Binding = std::variant<DistributionExpr, CurveBinding>;

struct StepSpec {
  std::string id;
  StepKind kind = StepKind::probability;
  Binding binding;
  std::string description;

  bool operator==(const StepSpec&) const = default;
};

struct RiskScenario {
  std::string name;
  std::vector<StepSpec> steps;

  bool operator==(const RiskScenario&) const = default;
};

struct Violation {
  std::string step_id;  // empty for scenario-level problems
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::string to_string() const;
};

/// Checks every scenario invariant. Returns the scenario unchanged when it
/// holds; otherwise lists all violations.
Expected<RiskScenario, ValidationReport> validate_scenario(RiskScenario scenario);

struct BenchmarkTask {
  std::string name;
  double fst_minutes = 0.0;
  std::vector<std::string> concepts;
};

/// Reads `name,fst_minutes,concepts` rows (header required, concepts
/// separated by ';'). Throws InputError.
std::vector<BenchmarkTask> read_benchmark_tasks(std::istream& in, std::string_view origin = "<stream>");
std::vector<BenchmarkTask> load_benchmark_tasks(const std::filesystem::path& path);

}  // namespace fstrisk
