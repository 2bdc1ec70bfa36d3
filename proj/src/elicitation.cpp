// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/elicitation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>

#include <fmt/format.h>

#include "fstrisk/csv.hpp"
#include "fstrisk/errors.hpp"

namespace fstrisk {
namespace {

constexpr std::string_view kHeader[] = {"task", "fst_minutes", "group", "expert", "round1", "rationale", "round2"};

std::optional<double> parse_pct(std::string_view cell, std::string_view origin, std::size_t line, std::string_view column) {
  cell = csv::trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.back() == '%') cell.remove_suffix(1);
  const auto value = csv::parse_real(cell);
  if (!value) throw InputError(fmt::format("{}:{}: {} is not a number: '{}'", origin, line, column, cell));
  if (*value < 0.0 || *value > 100.0) {
    throw InputError(fmt::format("{}:{}: {} = {} is outside [0, 100]", origin, line, column, cell));
  }
  return value;
}

std::set<std::string> split_ids(std::string_view list) {
  std::set<std::string> ids;
  while (!list.empty()) {
    const auto cut = list.find(',');
    const auto id = csv::trim(list.substr(0, cut));
    if (!id.empty()) ids.emplace(id);
    if (cut == std::string_view::npos) break;
    list.remove_prefix(cut + 1);
  }
  return ids;
}

}  // namespace

ElicitationDataset read_estimates(std::istream& in, std::string_view origin) {
  ElicitationDataset dataset;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::map<std::string, double> task_fst;

  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    if (!header_seen && trimmed.front() == '#') {
      const auto eq = trimmed.find('=');
      const auto key = csv::trim(trimmed.substr(1, eq == std::string_view::npos ? std::string_view::npos : eq - 1));
      const auto value = eq == std::string_view::npos ? std::string_view{} : csv::trim(trimmed.substr(eq + 1));
      if (key == "baseline") {
        const auto pct = parse_pct(value, origin, line_no, "baseline");
        if (!pct) throw InputError(fmt::format("{}:{}: #baseline needs a value", origin, line_no));
        dataset.baseline_pct = *pct;
      } else if (key == "exclude") {
        for (auto& id : split_ids(value)) dataset.excluded_experts.insert(id);
      }
      // Other comment lines are ignored.
      continue;
    }
    const auto fields = csv::split_record(line);
    if (!fields) throw InputError(fmt::format("{}:{}: unterminated quoted field", origin, line_no));
    if (fields->size() != std::size(kHeader)) {
      throw InputError(fmt::format("{}:{}: expected {} columns, found {}", origin, line_no, std::size(kHeader),
                                   fields->size()));
    }
    if (!header_seen) {
      for (std::size_t i = 0; i < std::size(kHeader); ++i) {
        if (csv::trim((*fields)[i]) != kHeader[i]) {
          throw InputError(fmt::format("{}:{}: expected header task,fst_minutes,group,expert,round1,rationale,round2",
                                       origin, line_no));
        }
      }
      header_seen = true;
      continue;
    }

    EstimateRecord rec;
    rec.task_name = std::string(csv::trim((*fields)[0]));
    const auto fst = csv::parse_real((*fields)[1]);
    if (!fst || *fst <= 0.0) throw InputError(fmt::format("{}:{}: fst_minutes must be positive", origin, line_no));
    rec.fst_minutes = *fst;
    rec.group = std::string(csv::trim((*fields)[2]));
    rec.expert_id = std::string(csv::trim((*fields)[3]));
    if (rec.task_name.empty() || rec.group.empty() || rec.expert_id.empty()) {
      throw InputError(fmt::format("{}:{}: task, group and expert are required", origin, line_no));
    }
    rec.round1_pct = parse_pct((*fields)[4], origin, line_no, "round1");
    if (!csv::trim((*fields)[5]).empty()) rec.rationale = (*fields)[5];
    rec.round2_pct = parse_pct((*fields)[6], origin, line_no, "round2");
    if (!rec.round1_pct && !rec.round2_pct) {
      throw InputError(fmt::format("{}:{}: row has neither a round-1 nor a round-2 estimate", origin, line_no));
    }

    const auto [fst_it, fresh] = task_fst.emplace(rec.task_name, rec.fst_minutes);
    if (!fresh && fst_it->second != rec.fst_minutes) {
      throw InputError(fmt::format("{}:{}: task '{}' listed with two different FSTs", origin, line_no, rec.task_name));
    }
    const auto [it, inserted] = seen.emplace(std::make_pair(rec.task_name, rec.expert_id), line_no);
    if (!inserted) {
      throw InputError(fmt::format("{}:{}: duplicate estimate for task '{}' and expert '{}' (first on line {})", origin,
                                   line_no, rec.task_name, rec.expert_id, it->second));
    }
    dataset.records.push_back(std::move(rec));
  }
  if (!header_seen) throw InputError(fmt::format("{}: missing header row", origin));

  for (const auto& id : dataset.excluded_experts) {
    const bool present = std::any_of(dataset.records.begin(), dataset.records.end(),
                                     [&](const EstimateRecord& r) { return r.expert_id == id; });
    if (!present) throw InputError(fmt::format("{}: #exclude names unknown expert '{}'", origin, id));
  }
  return dataset;
}

ElicitationDataset load_estimates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot read '{}'", path.string()));
  return read_estimates(in, path.string());
}

ExclusionResult apply_exclusions(const ElicitationDataset& dataset, const std::set<std::string>& expert_ids) {
  ExclusionResult result;
  result.dataset.baseline_pct = dataset.baseline_pct;
  for (const auto& id : expert_ids) {
    const bool present = std::any_of(dataset.records.begin(), dataset.records.end(),
                                     [&](const EstimateRecord& r) { return r.expert_id == id; });
    if (!present) result.warnings.push_back(fmt::format("excluded expert '{}' has no records", id));
  }
  for (const auto& rec : dataset.records) {
    if (!expert_ids.contains(rec.expert_id)) result.dataset.records.push_back(rec);
  }
  for (const auto& id : dataset.excluded_experts) {
    if (!expert_ids.contains(id)) result.dataset.excluded_experts.insert(id);
  }
  return result;
}

AggregateResult aggregate(const ElicitationDataset& dataset, const AggregateOptions& options) {
  if (options.round != 1 && options.round != 2) throw InputError("round must be 1 or 2");

  struct TaskValues {
    double fst = 0.0;
    std::vector<double> values;
  };
  // Keyed by name so record order cannot influence the result.
  std::map<std::string, TaskValues> tasks;
  bool any_record = false;
  for (const auto& rec : dataset.records) {
    if (dataset.excluded_experts.contains(rec.expert_id)) continue;
    any_record = true;
    auto& task = tasks[rec.task_name];
    task.fst = rec.fst_minutes;
    if (options.scope != kCombinedScope && rec.group != options.scope) continue;
    std::optional<double> pct = options.round == 1 ? rec.round1_pct : rec.round2_pct;
    if (!pct && options.round == 2 && options.carry_forward) pct = rec.round1_pct;
    if (pct) task.values.push_back(*pct / 100.0);
  }
  if (!any_record) throw InputError("no estimates left to aggregate (dataset is empty after exclusions)");

  AggregateResult result;
  for (auto& [name, task] : tasks) {
    if (task.values.empty()) {
      result.omitted_tasks.push_back(name);
      continue;
    }
    // Sorting fixes the summation order independently of record order.
    std::sort(task.values.begin(), task.values.end());
    const auto n = task.values.size();
    double sum = 0.0;
    for (double v : task.values) sum += v;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : task.values) ss += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    result.points.push_back(AggregatePoint{task.fst, options.scope, options.round, mean, sd, n,
                                           sd / std::sqrt(static_cast<double>(n))});
  }
  if (result.points.empty()) {
    throw InputError(fmt::format("no round-{} estimates for scope '{}'", options.round, options.scope));
  }
  std::stable_sort(result.points.begin(), result.points.end(),
                   [](const AggregatePoint& a, const AggregatePoint& b) { return a.fst_minutes < b.fst_minutes; });
  return result;
}

std::vector<std::string> groups(const ElicitationDataset& dataset) {
  std::set<std::string> labels;
  for (const auto& rec : dataset.records) labels.insert(rec.group);
  return {labels.begin(), labels.end()};
}

}  // namespace fstrisk
