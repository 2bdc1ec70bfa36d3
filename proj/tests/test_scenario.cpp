// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fstrisk/errors.hpp"
#include "fstrisk/rng.hpp"
#include "fstrisk/scenario.hpp"

using namespace fstrisk;

namespace {

StepSpec dist_step(std::string id, StepKind kind, DistributionExpr d) { return {std::move(id), kind, std::move(d), ""}; }

RiskScenario six_step() {
  return {"malware",
          {dist_step("actors", StepKind::count, DistributionExpr::point(10)),
           dist_step("attempts", StepKind::count, DistributionExpr::point(2)),
           dist_step("p3", StepKind::probability, DistributionExpr::point(0.5)),
           {"p4", StepKind::probability, CurveBinding{"cyber", 330, 1.0}, ""},
           dist_step("p5", StepKind::probability, DistributionExpr::point(0.4)),
           dist_step("damage", StepKind::loss, DistributionExpr::point(1e6))}};
}

bool mentions(const ValidationReport& report, std::string_view needle, std::string_view step = {}) {
  for (const auto& v : report.violations) {
    if (v.message.find(needle) != std::string::npos && (step.empty() || v.step_id == step)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("a six-step chain validates unchanged") {
  const auto scenario = six_step();
  const auto checked = validate_scenario(scenario);
  REQUIRE(checked.has_value());
  CHECK(checked.value() == scenario);
  // Idempotent.
  const auto again = validate_scenario(checked.value());
  REQUIRE(again.has_value());
  CHECK(again.value() == scenario);
}

TEST_CASE("scenario invariants are all reported") {
  SUBCASE("no probability step") {
    RiskScenario s{"x", {dist_step("n", StepKind::count, DistributionExpr::point(1)),
                         dist_step("l", StepKind::loss, DistributionExpr::point(1))}};
    const auto r = validate_scenario(s);
    REQUIRE_FALSE(r.has_value());
    CHECK(mentions(r.error(), "at least one probability step"));
  }
  SUBCASE("probability support outside [0, 1]") {
    auto s = six_step();
    s.steps[2].binding = DistributionExpr::uniform(0.5, 1.5);
    const auto r = validate_scenario(s);
    REQUIRE_FALSE(r.has_value());
    CHECK(mentions(r.error(), "outside [0, 1]", "p3"));
  }
  SUBCASE("lognormal probability is rejected") {
    auto s = six_step();
    s.steps[2].binding = DistributionExpr{Family::lognormal, {0, 1}};
    CHECK_FALSE(validate_scenario(s).has_value());
  }
  SUBCASE("duplicate ids, loss not last, curve on a count step") {
    auto s = six_step();
    s.steps[1].id = "actors";
    s.steps[0].binding = CurveBinding{"cyber", 10, 1.0};
    std::swap(s.steps[4], s.steps[5]);
    const auto r = validate_scenario(s);
    REQUIRE_FALSE(r.has_value());
    CHECK(mentions(r.error(), "duplicate step id", "actors"));
    CHECK(mentions(r.error(), "only allowed on probability steps", "actors"));
    CHECK(mentions(r.error(), "loss step must be the last step", "damage"));
  }
  SUBCASE("negative count support and bad parameters") {
    auto s = six_step();
    s.steps[0].binding = DistributionExpr::uniform(-1, 3);
    s.steps[1].binding = DistributionExpr{Family::triangular, {3, 1, 2}};
    s.steps[5].binding = DistributionExpr{Family::lognormal, {0, 0}};
    const auto r = validate_scenario(s);
    REQUIRE_FALSE(r.has_value());
    CHECK(mentions(r.error(), "nonnegative support", "actors"));
    CHECK(mentions(r.error(), "a <= mode <= b", "attempts"));
    CHECK(mentions(r.error(), "sigma > 0", "damage"));
  }
  SUBCASE("curve binding ranges") {
    auto s = six_step();
    s.steps[3].binding = CurveBinding{"cyber", 0.0, 1.5};
    const auto r = validate_scenario(s);
    REQUIRE_FALSE(r.has_value());
    CHECK(mentions(r.error(), "fst > 0", "p4"));
    CHECK(mentions(r.error(), "access probability", "p4"));
  }
  SUBCASE("two loss steps") {
    auto s = six_step();
    s.steps.push_back(dist_step("damage2", StepKind::loss, DistributionExpr::point(1)));
    CHECK(mentions(validate_scenario(s).error(), "exactly one loss step"));
  }
}

TEST_CASE("distribution means") {
  CHECK(distribution_mean(DistributionExpr::point(0.25)) == 0.25);
  CHECK(distribution_mean(DistributionExpr::uniform(0, 1)) == 0.5);
  CHECK(distribution_mean({Family::triangular, {0, 3, 6}}) == doctest::Approx(3.0));
  CHECK(distribution_mean({Family::lognormal, {0, 1}}) == doctest::Approx(1.6487212707001282).epsilon(1e-15));
  CHECK(distribution_mean({Family::beta, {2, 6}}) == 0.25);
}

TEST_CASE("analytic means agree with 10^6 seeded samples within 3 standard errors") {
  const DistributionExpr cases[] = {
      DistributionExpr::point(3.5),           DistributionExpr::uniform(2, 9),
      {Family::triangular, {0, 0.2, 1}},       {Family::triangular, {1, 1, 4}},
      {Family::lognormal, {0, 1}},             {Family::beta, {0.7, 2.5}},
  };
  const std::size_t n = 1000000;
  std::uint64_t stream = 0;
  for (const auto& d : cases) {
    CAPTURE(family_name(d.family));
    CounterRng rng(99, stream_id(StreamDomain::test, stream++));
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = sample(d, rng);
      const auto s = distribution_support(d);
      REQUIRE(x >= s.lo);
      REQUIRE(x <= s.hi);
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / n;
    const double se = std::sqrt(std::max(sum_sq / n - mean * mean, 0.0) / n);
    CHECK(std::abs(mean - distribution_mean(d)) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("family names and arities") {
  CHECK(family_from_name("lognormal") == Family::lognormal);
  CHECK_FALSE(family_from_name("gauss").has_value());
  CHECK(family_arity(Family::point) == 1);
  CHECK(family_arity(Family::triangular) == 3);
  CHECK(family_arity(Family::beta) == 2);
  CHECK(distribution_problems({Family::uniform, {1}}).size() == 1);
}

TEST_CASE("benchmark task fixture") {
  const auto tasks = load_benchmark_tasks(FSTRISK_DATA_DIR "/cybench_tasks.csv");
  REQUIRE(tasks.size() == 5);
  const double fsts[] = {7, 42, 123, 244, 330};
  for (std::size_t i = 0; i < 5; ++i) CHECK(tasks[i].fst_minutes == fsts[i]);
  CHECK(tasks[4].name == "Frog WAF");
  CHECK(tasks[2].concepts == std::vector<std::string>{"injection", "filter bypass"});

  std::istringstream no_header("Frog WAF,330,x\n");
  CHECK_THROWS_AS(read_benchmark_tasks(no_header), InputError);
  std::istringstream bad_fst("name,fst_minutes,concepts\nx,-3,y\n");
  CHECK_THROWS_AS(read_benchmark_tasks(bad_fst), InputError);
  CHECK_THROWS_AS(load_benchmark_tasks("/nonexistent/tasks.csv"), InputError);
}
