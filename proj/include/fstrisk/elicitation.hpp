// SPDX-License-Identifier: Apache-2.0
//
// Two-round expert elicitation data and its per-task aggregation.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fstrisk {

/// One expert's estimates for one task. Percentages are kept as recorded
/// (0-100).
struct EstimateRecord {
  std::string task_name;
  double fst_minutes = 0.0;
  std::string group;
  std::string expert_id;
  std::optional<double> round1_pct;
  std::optional<std::string> rationale;
  std::optional<double> round2_pct;

  bool operator==(const EstimateRecord&) const = default;
};

struct ElicitationDataset {
  std::vector<EstimateRecord> records;
  double baseline_pct = 25.0;
  std::set<std::string> excluded_experts;

  bool operator==(const ElicitationDataset&) const = default;
};

inline constexpr std::string_view kCombinedScope = "combined";

struct AggregatePoint {
  double fst_minutes = 0.0;
  std::string scope;
  int round = 2;
  double mean_p = 0.0;
  double sd_p = 0.0;
  std::size_t n = 0;
  double se_p = 0.0;
};

struct AggregateOptions {
  int round = 2;
  std::string scope{kCombinedScope};
  /// Round 2 falls back to the round-1 value when the round-2 cell is empty.
  bool carry_forward = false;
};

struct AggregateResult {
  std::vector<AggregatePoint> points;   // ascending fst
  std::vector<std::string> omitted_tasks;
};

/// Reads the estimates format:
///
///   #baseline=25
///   #exclude=expert6,expert7
///   task,fst_minutes,group,expert,round1,rationale,round2
///   It Has Begun,7,A,expert1,30,,28
///
/// Throws InputError with file:line context.
ElicitationDataset read_estimates(std::istream& in, std::string_view origin = "<stream>");
ElicitationDataset load_estimates(const std::filesystem::path& path);

struct ExclusionResult {
  ElicitationDataset dataset;
  std::vector<std::string> warnings;
};

/// Drops every record from the listed experts. Ids that match nothing
/// produce a warning rather than an error.
ExclusionResult apply_exclusions(const ElicitationDataset& dataset, const std::set<std::string>& expert_ids);

/// Per-task mean, sample sd (n - 1) and standard error of estimates / 100.
/// Throws InputError when nothing is left to aggregate.
AggregateResult aggregate(const ElicitationDataset& dataset, const AggregateOptions& options);

/// Group labels present in the dataset, sorted.
std::vector<std::string> groups(const ElicitationDataset& dataset);

}  // namespace fstrisk
