// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/scenario.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fstrisk/csv.hpp"
#include "fstrisk/errors.hpp"
#include "fstrisk/rng.hpp"

namespace fstrisk {

std::string_view family_name(Family family) noexcept {
  switch (family) {
    case Family::point: return "point";
    case Family::uniform: return "uniform";
    case Family::triangular: return "triangular";
    case Family::lognormal: return "lognormal";
    case Family::beta: return "beta";
  }
  return "?";
}

std::optional<Family> family_from_name(std::string_view name) noexcept {
  for (Family f : {Family::point, Family::uniform, Family::triangular, Family::lognormal, Family::beta}) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

std::size_t family_arity(Family family) noexcept {
  switch (family) {
    case Family::point: return 1;
    case Family::triangular: return 3;
    default: return 2;
  }
}

std::vector<std::string> distribution_problems(const DistributionExpr& expr) {
  std::vector<std::string> problems;
  const auto& p = expr.params;
  const auto name = family_name(expr.family);
  if (p.size() != family_arity(expr.family)) {
    problems.push_back(fmt::format("{} takes {} parameter(s), got {}", name, family_arity(expr.family), p.size()));
    return problems;
  }
  for (double v : p) {
    if (!std::isfinite(v)) {
      problems.push_back(fmt::format("{} parameters must be finite", name));
      return problems;
    }
  }
  switch (expr.family) {
    case Family::point: break;
    case Family::uniform:
      if (!(p[0] < p[1])) problems.push_back("uniform requires a < b");
      break;
    case Family::triangular:
      if (!(p[0] <= p[1] && p[1] <= p[2])) problems.push_back("triangular requires a <= mode <= b");
      if (!(p[0] < p[2])) problems.push_back("triangular requires a < b");
      break;
    case Family::lognormal:
      if (!(p[1] > 0.0)) problems.push_back("lognormal requires sigma > 0");
      break;
    case Family::beta:
      if (!(p[0] > 0.0 && p[1] > 0.0)) problems.push_back("beta requires alpha > 0 and beta > 0");
      break;
  }
  return problems;
}

Support distribution_support(const DistributionExpr& expr) {
  const auto& p = expr.params;
  switch (expr.family) {
    case Family::point: return {p[0], p[0]};
    case Family::uniform: return {p[0], p[1]};
    case Family::triangular: return {p[0], p[2]};
    case Family::lognormal: return {0.0, std::numeric_limits<double>::infinity()};
    case Family::beta: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

double distribution_mean(const DistributionExpr& expr) {
  const auto& p = expr.params;
  switch (expr.family) {
    case Family::point: return p[0];
    case Family::uniform: return 0.5 * (p[0] + p[1]);
    case Family::triangular: return (p[0] + p[1] + p[2]) / 3.0;
    case Family::lognormal: return std::exp(p[0] + 0.5 * p[1] * p[1]);
    case Family::beta: return p[0] / (p[0] + p[1]);
  }
  return 0.0;
}

double sample(const DistributionExpr& expr, CounterRng& rng) {
  const auto& p = expr.params;
  switch (expr.family) {
    case Family::point: return p[0];
    case Family::uniform: return p[0] + (p[1] - p[0]) * rng.uniform();
    case Family::triangular: {
      const double a = p[0], m = p[1], b = p[2];
      const double u = rng.uniform();
      const double split = (m - a) / (b - a);
      if (u < split) return a + std::sqrt(u * (b - a) * (m - a));
      return b - std::sqrt((1.0 - u) * (b - a) * (b - m));
    }
    case Family::lognormal: return std::exp(p[0] + p[1] * rng.normal());
    case Family::beta: return rng.beta(p[0], p[1]);
  }
  return 0.0;
}

std::string_view step_kind_name(StepKind kind) noexcept {
  switch (kind) {
    case StepKind::count: return "count";
    case StepKind::probability: return "probability";
    case StepKind::loss: return "loss";
  }
  return "?";
}

std::optional<StepKind> step_kind_from_name(std::string_view name) noexcept {
  for (StepKind k : {StepKind::count, StepKind::probability, StepKind::loss}) {
    if (step_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += '\n';
    out += v.step_id.empty() ? v.message : fmt::format("step '{}': {}", v.step_id, v.message);
  }
  return out;
}

namespace {

void check_binding(const StepSpec& step, std::vector<Violation>& out) {
  if (const auto* curve = std::get_if<CurveBinding>(&step.binding)) {
    if (step.kind != StepKind::probability) {
      out.push_back({step.id, fmt::format("curve binding is only allowed on probability steps, not {}",
                                          step_kind_name(step.kind))});
    }
    if (curve->curve_id.empty()) out.push_back({step.id, "curve binding needs a curve id"});
    if (!(curve->fst_minutes > 0.0) || !std::isfinite(curve->fst_minutes)) {
      out.push_back({step.id, "curve binding needs fst > 0"});
    }
    if (!(curve->access_probability >= 0.0 && curve->access_probability <= 1.0)) {
      out.push_back({step.id, "access probability must lie in [0, 1]"});
    }
    return;
  }
  const auto& dist = std::get<DistributionExpr>(step.binding);
  const auto problems = distribution_problems(dist);
  for (const auto& p : problems) out.push_back({step.id, p});
  if (!problems.empty()) return;
  const Support s = distribution_support(dist);
  if (step.kind == StepKind::probability) {
    if (s.lo < 0.0 || s.hi > 1.0) {
      out.push_back({step.id, fmt::format("probability step has support [{}, {}] outside [0, 1]",
                                          csv::format_real(s.lo), csv::format_real(s.hi))});
    }
  } else if (s.lo < 0.0) {
    out.push_back({step.id, fmt::format("{} step needs nonnegative support, lower bound is {}",
                                        step_kind_name(step.kind), csv::format_real(s.lo))});
  }
}

}  // namespace

Expected<RiskScenario, ValidationReport> validate_scenario(RiskScenario scenario) {
  ValidationReport report;
  auto& out = report.violations;

  std::size_t probability_steps = 0;
  std::size_t loss_steps = 0;
  std::set<std::string> seen;
  for (const auto& step : scenario.steps) {
    if (step.id.empty()) out.push_back({"", "step identifier must not be empty"});
    if (!seen.insert(step.id).second) out.push_back({step.id, "duplicate step id"});
    if (step.kind == StepKind::probability) ++probability_steps;
    if (step.kind == StepKind::loss) ++loss_steps;
    check_binding(step, out);
  }
  if (probability_steps == 0) out.push_back({"", "scenario needs at least one probability step"});
  if (loss_steps != 1) {
    out.push_back({"", fmt::format("scenario needs exactly one loss step, found {}", loss_steps)});
  }
  for (std::size_t i = 0; i + 1 < scenario.steps.size(); ++i) {
    if (scenario.steps[i].kind == StepKind::loss) {
      out.push_back({scenario.steps[i].id, "loss step must be the last step"});
    }
  }

  if (!out.empty()) return report;
  return scenario;
}

std::vector<BenchmarkTask> read_benchmark_tasks(std::istream& in, std::string_view origin) {
  std::vector<BenchmarkTask> tasks;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_record(line);
    if (!fields || fields->size() != 3) {
      throw InputError(fmt::format("{}:{}: expected 3 columns (name,fst_minutes,concepts)", origin, line_no));
    }
    if (!header_seen) {
      if (csv::trim((*fields)[0]) != "name" || csv::trim((*fields)[1]) != "fst_minutes") {
        throw InputError(fmt::format("{}:{}: missing header row name,fst_minutes,concepts", origin, line_no));
      }
      header_seen = true;
      continue;
    }
    BenchmarkTask task;
    task.name = std::string(csv::trim((*fields)[0]));
    const auto fst = csv::parse_real((*fields)[1]);
    if (!fst || *fst <= 0.0) {
      throw InputError(fmt::format("{}:{}: fst_minutes must be a positive number", origin, line_no));
    }
    task.fst_minutes = *fst;
    std::string_view rest = (*fields)[2];
    while (!rest.empty()) {
      const auto cut = rest.find(';');
      const auto tag = csv::trim(rest.substr(0, cut));
      if (!tag.empty()) task.concepts.emplace_back(tag);
      if (cut == std::string_view::npos) break;
      rest.remove_prefix(cut + 1);
    }
    tasks.push_back(std::move(task));
  }
  if (!header_seen) throw InputError(fmt::format("{}: missing header row", origin));
  return tasks;
}

std::vector<BenchmarkTask> load_benchmark_tasks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot read '{}'", path.string()));
  return read_benchmark_tasks(in, path.string());
}

}  // namespace fstrisk
