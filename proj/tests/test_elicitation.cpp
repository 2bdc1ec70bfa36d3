// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fstrisk/elicitation.hpp"
#include "fstrisk/errors.hpp"
#include "fstrisk/rng.hpp"

using namespace fstrisk;

namespace {

const ElicitationDataset& fixture() {
  static const auto ds = load_estimates(FSTRISK_DATA_DIR "/estimates_workshop.csv");
  return ds;
}

const AggregatePoint& at(const AggregateResult& r, double fst) {
  const auto it = std::find_if(r.points.begin(), r.points.end(), [&](const auto& p) { return p.fst_minutes == fst; });
  REQUIRE(it != r.points.end());
  return *it;
}

ElicitationDataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_estimates(in);
}

constexpr const char* kHeader = "task,fst_minutes,group,expert,round1,rationale,round2\n";

}  // namespace

TEST_CASE("fixture loads every non-empty appendix row") {
  const auto& ds = fixture();
  CHECK(ds.records.size() == 29);
  CHECK(ds.baseline_pct == 25.0);
  CHECK(ds.excluded_experts.empty());
  std::set<std::string> tasks, experts;
  for (const auto& r : ds.records) {
    tasks.insert(r.task_name);
    experts.insert(r.expert_id);
  }
  CHECK(tasks.size() == 5);
  CHECK(experts.size() == 7);
  CHECK(groups(ds) == std::vector<std::string>{"A", "B"});

  const auto it = std::find_if(ds.records.begin(), ds.records.end(),
                               [](const auto& r) { return r.task_name == "It Has Begun" && r.expert_id == "expert6"; });
  REQUIRE(it != ds.records.end());
  CHECK(it->group == "B");
  CHECK(it->round1_pct == 75.0);
  CHECK(it->round2_pct == 30.0);
}

TEST_CASE("loader errors") {
  CHECK_THROWS_AS(parse(std::string(kHeader) + "t,7,A,e1,130,,30\n"), InputError);
  CHECK_THROWS_AS(parse(std::string(kHeader) + "t,7,A,e1,30,30\n"), InputError);
  CHECK_THROWS_AS(parse(std::string(kHeader) + "t,7,A,e1,30,,30\nt,7,B,e1,20,,20\n"), InputError);
  CHECK_THROWS_AS(parse(std::string(kHeader) + "t,7,A,e1,,,\n"), InputError);
  CHECK_THROWS_AS(parse(std::string(kHeader) + "t,7,A,e1,x,,1\n"), InputError);
  CHECK_THROWS_AS(parse("#exclude=ghost\n" + std::string(kHeader) + "t,7,A,e1,30,,30\n"), InputError);
  CHECK_THROWS_AS(parse("t,7,A,e1,30,,30\n"), InputError);
  CHECK_THROWS_AS(load_estimates("/nonexistent.csv"), InputError);
  try {
    parse(std::string(kHeader) + "t,7,A,e1,30,,30\nt,7,A,e2,130,,30\n");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
}

TEST_CASE("directives, quoting and absent cells") {
  const auto ds = parse("#baseline=20\n#exclude=e2\n" + std::string(kHeader) +
                        "t,7,A,e1,30%,\"said \"\"hi\"\", then left\",\n"
                        "t,7,B,e2,,,40\n");
  CHECK(ds.baseline_pct == 20.0);
  CHECK(ds.excluded_experts == std::set<std::string>{"e2"});
  REQUIRE(ds.records.size() == 2);
  CHECK(ds.records[0].rationale == std::optional<std::string>("said \"hi\", then left"));
  CHECK_FALSE(ds.records[0].round2_pct.has_value());
  CHECK_FALSE(ds.records[1].round1_pct.has_value());

  // e2 is excluded; e1 has no round-2 value unless carried forward.
  CHECK_THROWS_AS(aggregate(ds, {2, "combined", false}), InputError);
  const auto carried = aggregate(ds, {2, "combined", true});
  REQUIRE(carried.points.size() == 1);
  CHECK(carried.points[0].mean_p == doctest::Approx(0.30));
}

TEST_CASE("round-2 aggregates match hand arithmetic") {
  const auto combined = aggregate(fixture(), {2, "combined"});
  CHECK(combined.points.size() == 5);
  CHECK(combined.omitted_tasks.empty());
  for (std::size_t i = 1; i < combined.points.size(); ++i) {
    CHECK(combined.points[i - 1].fst_minutes < combined.points[i].fst_minutes);
  }
  CHECK(std::abs(at(combined, 7).mean_p - 194.0 / 700.0) < 1e-12);
  CHECK(at(combined, 7).n == 7);
  CHECK(std::abs(at(combined, 330).mean_p - 0.582) < 1e-12);

  const auto a = aggregate(fixture(), {2, "A"});
  CHECK(std::abs(at(a, 330).mean_p - 215.0 / 300.0) < 1e-12);
  CHECK(at(a, 330).sd_p == doctest::Approx(0.02886751345948129).epsilon(1e-12));
  CHECK(at(a, 330).n == 3);

  const auto b = aggregate(fixture(), {2, "B"});
  CHECK(at(b, 330).mean_p == doctest::Approx(0.38).epsilon(1e-12));
  CHECK(at(b, 330).sd_p == 0.0);
  CHECK(at(b, 330).se_p == 0.0);
  CHECK(at(b, 330).n == 2);
}

TEST_CASE("exclusions") {
  SUBCASE("empty set is the identity") {
    const auto r = apply_exclusions(fixture(), {});
    CHECK(r.dataset == fixture());
    CHECK(r.warnings.empty());
  }
  SUBCASE("dropping expert6 shifts the task-1 round-1 mean") {
    const auto r = apply_exclusions(fixture(), {"expert6"});
    CHECK(r.dataset.records.size() == 27);
    CHECK(fixture().records.size() == 29);
    const auto agg = aggregate(r.dataset, {1, "combined"});
    CHECK(at(agg, 7).n == 6);
    CHECK(std::abs(at(agg, 7).mean_p - (245.5 - 75.0) / 600.0) < 1e-12);
  }
  SUBCASE("unknown ids warn") {
    const auto r = apply_exclusions(fixture(), {"nobody"});
    CHECK(r.dataset.records.size() == 29);
    CHECK(r.warnings.size() == 1);
  }
  SUBCASE("excluding everyone leaves nothing to aggregate") {
    std::set<std::string> all;
    for (int i = 1; i <= 7; ++i) all.insert("expert" + std::to_string(i));
    const auto r = apply_exclusions(fixture(), all);
    CHECK(r.dataset.records.empty());
    CHECK_THROWS_AS(aggregate(r.dataset, {2, "combined"}), InputError);
  }
}

TEST_CASE("aggregate invariants") {
  SUBCASE("single record") {
    const auto ds = parse(std::string(kHeader) + "t,7,A,e1,31,,33\n");
    const auto r = aggregate(ds, {2, "combined"});
    REQUIRE(r.points.size() == 1);
    CHECK(r.points[0].mean_p == 0.33);
    CHECK(r.points[0].sd_p == 0.0);
    CHECK(r.points[0].se_p == 0.0);
  }
  SUBCASE("combined n is the sum of group n") {
    for (int round : {1, 2}) {
      const auto c = aggregate(fixture(), {round, "combined"});
      const auto a = aggregate(fixture(), {round, "A"});
      const auto b = aggregate(fixture(), {round, "B"});
      for (const auto& p : c.points) CHECK(p.n == at(a, p.fst_minutes).n + at(b, p.fst_minutes).n);
    }
  }
  SUBCASE("record order does not matter") {
    const auto base = aggregate(fixture(), {2, "combined"});
    CounterRng rng(5, stream_id(StreamDomain::test, 21));
    for (int trial = 0; trial < 20; ++trial) {
      auto shuffled = fixture();
      auto& recs = shuffled.records;
      for (std::size_t i = recs.size() - 1; i > 0; --i) std::swap(recs[i], recs[rng.index(i + 1)]);
      const auto r = aggregate(shuffled, {2, "combined"});
      REQUIRE(r.points.size() == base.points.size());
      for (std::size_t i = 0; i < r.points.size(); ++i) {
        CHECK(r.points[i].mean_p == base.points[i].mean_p);
        CHECK(r.points[i].sd_p == base.points[i].sd_p);
        CHECK(r.points[i].n == base.points[i].n);
      }
    }
  }
  SUBCASE("discussion pulled the task-1 outlier in") {
    CHECK(at(aggregate(fixture(), {2, "combined"}), 7).mean_p < at(aggregate(fixture(), {1, "combined"}), 7).mean_p);
  }
  SUBCASE("se never exceeds sd") {
    for (const auto& p : aggregate(fixture(), {1, "combined"}).points) CHECK(p.se_p <= p.sd_p);
  }
}
