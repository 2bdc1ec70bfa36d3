// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fstrisk/dsl.hpp"
#include "fstrisk/elicitation.hpp"
#include "fstrisk/errors.hpp"
#include "fstrisk/propagate.hpp"

using namespace fstrisk;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RiskScenario parse_file(const std::string& name) {
  auto parsed = parse_scenario(slurp(std::string(FSTRISK_DATA_DIR "/") + name));
  REQUIRE(parsed.has_value());
  return std::move(parsed).value();
}

RiskScenario parse_text(const std::string& text) {
  auto parsed = parse_scenario(text);
  if (!parsed) FAIL(parsed.error().to_string());
  return std::move(parsed).value();
}

std::shared_ptr<const PosteriorSamples> fixture_posterior() {
  static const auto samples = [] {
    const auto points =
        aggregate(load_estimates(FSTRISK_DATA_DIR "/estimates_workshop.csv"), {2, "combined"}).points;
    McmcConfig cfg;
    cfg.draws = 4000;
    return std::make_shared<const PosteriorSamples>(fit_curve(points, 0.25, cfg));
  }();
  return samples;
}

double standard_error(const RiskResult& r) {
  double m = r.expected_loss, s = 0.0;
  for (double x : r.loss_samples) s += (x - m) * (x - m);
  const auto n = static_cast<double>(r.loss_samples.size());
  return std::sqrt(s / (n - 1.0) / n);
}

}  // namespace

TEST_CASE("point scenario matches the closed-form product") {
  const auto model = compile(parse_file("demo_point.riskdsl"), {}, 100000);
  CHECK(closed_form_expected_loss(model) == doctest::Approx(1.2e6).epsilon(1e-12));
  const auto r = sample_annual_loss(model);
  CHECK(r.replicates == 100000);
  CHECK(r.loss_samples.size() == 100000);
  CHECK(r.aborted_replicates == 0);
  CHECK(r.success_prob_mean == doctest::Approx(0.06).epsilon(1e-12));
  CHECK(std::abs(r.expected_loss - 1.2e6) < 3.0 * standard_error(r));
  // Every loss is a whole number of successes times 1e6.
  for (double x : r.loss_samples) REQUIRE(std::fmod(x, 1e6) == 0.0);
  REQUIRE(r.quantiles.size() == 5);
  for (std::size_t i = 1; i < r.quantiles.size(); ++i) CHECK(r.quantiles[i].second >= r.quantiles[i - 1].second);
}

TEST_CASE("bit-identical across runs and execution policies") {
  const auto model = compile(parse_file("demo_point.riskdsl"), {}, 20000, 31);
  const auto a = sample_annual_loss(model, Execution::parallel);
  const auto b = sample_annual_loss(model, Execution::parallel);
  const auto c = sample_annual_loss(model, Execution::serial);
  CHECK(a == b);
  CHECK(a == c);
  const auto other = sample_annual_loss(compile(parse_file("demo_point.riskdsl"), {}, 20000, 32));
  CHECK(other.loss_samples != a.loss_samples);

  CurveSources curves{{"cyber", fixture_posterior()}};
  const auto curved = compile(parse_file("malware.riskdsl"), curves, 20000, 5);
  CHECK(sample_annual_loss(curved, Execution::serial) == sample_annual_loss(curved, Execution::parallel));
}

TEST_CASE("degenerate and closed-form cases") {
  SUBCASE("zero probability gives zero loss") {
    const auto model = compile(parse_text(R"(scenario "z" {
      step n: count = point(100)
      step p: probability = point(0)
      step l: loss = point(5e6)
    })"),
                               {}, 5000);
    const auto r = sample_annual_loss(model);
    CHECK(r.expected_loss == 0.0);
    for (const auto& q : r.quantiles) CHECK(q.second == 0.0);
  }
  SUBCASE("one certain attempt is the identity") {
    const auto model = compile(parse_text(R"(scenario "id" {
      step n: count = point(1)
      step p: probability = point(1)
      step l: loss = point(1)
    })"),
                               {}, 5000);
    CHECK(closed_form_expected_loss(model) == 1.0);
    const auto r = sample_annual_loss(model);
    CHECK(r.expected_loss == 1.0);
    for (double x : r.loss_samples) REQUIRE(x == 1.0);
  }
  SUBCASE("uniform probability") {
    const auto model = compile(parse_text(R"(scenario "u" {
      step n: count = point(1)
      step p: probability = uniform(0, 1)
      step l: loss = point(1)
    })"),
                               {}, 100000);
    CHECK(closed_form_expected_loss(model) == 0.5);
    const auto r = sample_annual_loss(model);
    CHECK(std::abs(r.expected_loss - 0.5) < 3.0 * standard_error(r));
    CHECK(std::abs(r.success_prob_mean - 0.5) < 0.005);
  }
  SUBCASE("sampled loss family") {
    const auto model = compile(parse_text(R"(scenario "ln" {
      step n: count = point(40)
      step p: probability = point(0.5)
      step l: loss = lognormal(0, 0.5)
    })"),
                               {}, 100000);
    const double closed = 20.0 * std::exp(0.125);
    CHECK(closed_form_expected_loss(model) == doctest::Approx(closed).epsilon(1e-12));
    const auto r = sample_annual_loss(model);
    CHECK(std::abs(r.expected_loss - closed) < 3.0 * standard_error(r));
  }
}

TEST_CASE("expected loss increases with a probability step") {
  double previous = -1.0;
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    std::ostringstream text;
    text << "scenario \"m\" {\n step n: count = point(50)\n step p: probability = point(" << p
         << ")\n step l: loss = point(1000)\n}\n";
    const auto r = sample_annual_loss(compile(parse_text(text.str()), {}, 20000, 3));
    CHECK(r.expected_loss > previous);
    previous = r.expected_loss;
  }
}

TEST_CASE("compile errors") {
  CHECK_THROWS_AS(compile(parse_file("malware.riskdsl"), {}), InputError);
  CHECK_THROWS_AS(compile(parse_file("demo_point.riskdsl"), {}, 0), InputError);
  RiskScenario broken = parse_file("demo_point.riskdsl");
  broken.steps.pop_back();
  CHECK_THROWS_AS(compile(broken, {}), InputError);
}

TEST_CASE("curve-bound success probability stays inside the credible band") {
  const auto summary = summarize_curve(*fixture_posterior(), std::vector<double>{330.0}, 0.9);
  const auto model = compile(parse_text(R"(scenario "c" {
    step n: count = point(100)
    step p: probability = curve(cyber, fst=330)
    step l: loss = point(1)
  })"),
                             {{"cyber", fixture_posterior()}}, 50000);
  const auto r = sample_annual_loss(model);
  CHECK(r.success_prob_mean >= summary.grid[0].lo);
  CHECK(r.success_prob_mean <= summary.grid[0].hi);
  CHECK(closed_form_expected_loss(model) == doctest::Approx(100.0 * posterior_mean_curve(*fixture_posterior(), 330.0)));
}

TEST_CASE("uplift against the no-LLM baseline and between capability levels") {
  CurveSources curves{{"cyber", fixture_posterior()}};
  const auto model = compile(parse_file("malware.riskdsl"), curves, 20000);

  const auto none32 = uplift(model, std::nullopt, 32.0);
  CHECK_FALSE(none32.fst_a.has_value());
  CHECK(none32.p_a == 0.25);
  CHECK(none32.p_b >= 0.28);
  CHECK(none32.p_b <= 0.38);
  CHECK(none32.delta_pp >= 3.0);
  CHECK(none32.delta_pp <= 13.0);
  CHECK(none32.expected_loss_b > none32.expected_loss_a);

  const auto same = uplift(model, 42.0, 42.0);
  CHECK(same.delta_pp == 0.0);
  CHECK(same.expected_loss_a == same.expected_loss_b);

  const auto span = uplift(model, 7.0, 330.0);
  CHECK(span.delta_pp > 0.0);

  const auto none330 = uplift(model, std::nullopt, 330.0);
  CHECK(none330.delta_pp >= 15.0);
  CHECK(none330.delta_pp <= 40.0);

  CHECK_THROWS_AS(uplift(compile(parse_file("demo_point.riskdsl"), {}), std::nullopt, 32.0), InputError);
}

TEST_CASE("attempt counts beyond 2^63 abort the replicate") {
  const auto all = compile(parse_text(R"(scenario "big" {
    step a: count = point(1e10)
    step b: count = point(1e10)
    step p: probability = point(0.5)
    step l: loss = point(1)
  })"),
                           {}, 100);
  CHECK_THROWS_AS(sample_annual_loss(all), NumericalError);

  const auto some = compile(parse_text(R"(scenario "some" {
    step a: count = uniform(0, 1.8446744073709552e19)
    step p: probability = point(1e-18)
    step l: loss = point(1)
  })"),
                            {}, 2000);
  const auto r = sample_annual_loss(some);
  CHECK(r.aborted_replicates > 800);
  CHECK(r.aborted_replicates < 1200);
  CHECK(r.loss_samples.size() + r.aborted_replicates == 2000);
  std::ostringstream json;
  write_risk_result(json, r);
  CHECK(nlohmann::json::parse(json.str())["aborted_replicates"] == r.aborted_replicates);
}

TEST_CASE("nearest-rank quantiles") {
  const std::vector<double> xs{5, 1, 4, 2, 3};
  CHECK(nearest_rank(xs, 0.05) == 1);
  CHECK(nearest_rank(xs, 0.2) == 1);
  CHECK(nearest_rank(xs, 0.5) == 3);
  CHECK(nearest_rank(xs, 0.95) == 5);
  CHECK(nearest_rank(xs, 1.0) == 5);
}

TEST_CASE("json export") {
  const auto model = compile(parse_file("demo_point.riskdsl"), {}, 1000, 17);
  const auto r = sample_annual_loss(model);
  CurveSources curves{{"cyber", fixture_posterior()}};
  const auto u = uplift(compile(parse_file("malware.riskdsl"), curves, 1000), std::nullopt, 32.0);
  std::ostringstream out;
  write_risk_result(out, r, &u);
  const auto doc = nlohmann::json::parse(out.str());
  CHECK(doc["expected_loss"].get<double>() == r.expected_loss);
  CHECK(doc["replicates"] == 1000);
  CHECK(doc["seed"] == 17);
  CHECK(doc["quantiles"].size() == 5);
  CHECK(doc["uplift"]["fst_a"] == "none");
  CHECK(doc["uplift"]["p_a"].get<double>() == 0.25);
}
