// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dsl_support.hpp"
#include "fstrisk/dsl.hpp"
#include "fstrisk/rng.hpp"

using namespace fstrisk;
using fstrisk::testing::span_in_bounds;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ParseError parse_error(std::string_view src) {
  const auto r = parse_scenario(src);
  REQUIRE_FALSE(r.has_value());
  CHECK(span_in_bounds(src, r.error().span));
  CHECK_FALSE(r.error().message.empty());
  return r.error();
}

constexpr std::string_view kSixSteps = R"(scenario "fig2" {
  step actors: count = point(100)
  step attempts: count = point(3)
  step p3: probability = point(0.5)
  step p4: probability = curve(cyber, fst=330)
  step p5: probability = point(0.4)
  step damage: loss = point(1000000)
})";

}  // namespace

TEST_CASE("six-step scenario parses") {
  const auto r = parse_scenario(kSixSteps);
  REQUIRE(r.has_value());
  const auto& s = r.value();
  CHECK(s.name == "fig2");
  REQUIRE(s.steps.size() == 6);
  CHECK(s.steps[0].kind == StepKind::count);
  CHECK(std::get<DistributionExpr>(s.steps[0].binding) == DistributionExpr::point(100));
  CHECK(s.steps[5].kind == StepKind::loss);
  const auto& curve = std::get<CurveBinding>(s.steps[3].binding);
  CHECK(curve.curve_id == "cyber");
  CHECK(curve.fst_minutes == 330.0);
  CHECK(curve.access_probability == 1.0);
}

TEST_CASE("numbers, comments and access") {
  const auto r = parse_scenario(R"(# leading comment
scenario "n" {  # trailing
  step a: count = lognormal(-1.5e-1, 2E0)
  step b: probability = curve(c2, fst=4.5e1, access=0.25)
  step c: loss = triangular(.5, 1., +3)
})");
  REQUIRE(r.has_value());
  CHECK(std::get<DistributionExpr>(r->steps[0].binding).params == std::vector<double>{-0.15, 2.0});
  CHECK(std::get<CurveBinding>(r->steps[1].binding) == CurveBinding{"c2", 45.0, 0.25});
  CHECK(std::get<DistributionExpr>(r->steps[2].binding).params == std::vector<double>{0.5, 1.0, 3.0});
}

TEST_CASE("empty source expects 'scenario' at 1:1") {
  const auto e = parse_error("");
  CHECK(e.span == SourceSpan{1, 1, 0});
  REQUIRE(e.expected.size() == 1);
  CHECK(e.expected[0] == "'scenario'");
}

TEST_CASE("errors carry positions") {
  SUBCASE("lexical") {
    const auto e = parse_error("scenario \"x\" {\n  step a: count = point(1) @\n}");
    CHECK(e.span.line == 2);
    CHECK(e.span.column == 28);
    CHECK(e.message.find("unexpected character '@'") != std::string::npos);
  }
  SUBCASE("syntax") {
    const auto e = parse_error("scenario \"x\" {\n  step a count = point(1)\n}");
    CHECK(e.span.line == 2);
    CHECK(e.span.column == 10);
    CHECK(e.expected == std::vector<std::string>{"':'"});
  }
  SUBCASE("unknown family") {
    const auto e = parse_error("scenario \"x\" {\n step a: probability = gauss(0, 1)\n step l: loss = point(1)\n}");
    CHECK(e.span == SourceSpan{2, 24, 5});
    CHECK(e.message.find("unknown distribution family") != std::string::npos);
  }
  SUBCASE("wrong arity") {
    const auto e = parse_error("scenario \"x\" {\n step a: probability = uniform(0.1)\n step l: loss = point(1)\n}");
    CHECK(e.span.line == 2);
    CHECK(e.span.column == 24);
    CHECK(e.message.find("takes 2") != std::string::npos);
  }
  SUBCASE("unknown step kind") {
    const auto e = parse_error("scenario \"x\" {\n step a: chance = point(0.1)\n}");
    CHECK(e.span == SourceSpan{2, 10, 6});
  }
  SUBCASE("semantic errors point at the step") {
    const auto e = parse_error("scenario \"x\" {\n step a: probability = uniform(0.5, 1.5)\n step l: loss = point(1)\n}");
    CHECK(e.span.line == 2);
    CHECK(e.message.find("outside [0, 1]") != std::string::npos);
    const auto dup = parse_error(
        "scenario \"x\" {\n step a: probability = point(0.5)\n step a: probability = point(0.5)\n step l: loss = point(1)\n}");
    CHECK(dup.span.line == 3);
    const auto none = parse_error("scenario \"x\" {\n step l: loss = point(1)\n}");
    CHECK(none.message.find("at least one probability step") != std::string::npos);
  }
  SUBCASE("trailing input and unterminated string") {
    CHECK(parse_error(std::string(kSixSteps) + " extra").span.line == 8);
    CHECK(parse_error("scenario \"abc").message == "unterminated string");
  }
  SUBCASE("multibyte columns count code points") {
    const auto e = parse_error("scenario \"é\" { ?");
    CHECK(e.span.column == 16);
  }
}

TEST_CASE("bundled scenarios parse") {
  for (const char* name : {"/demo_point.riskdsl", "/malware.riskdsl"}) {
    CAPTURE(name);
    const auto src = read_file(std::string(FSTRISK_DATA_DIR) + name);
    const auto r = parse_scenario(src);
    REQUIRE_MESSAGE(r.has_value(), (r.has_value() ? "" : r.error().to_string()));
    CHECK(r->steps.size() == 6);
  }
}

namespace {

RiskScenario random_scenario(CounterRng& rng) {
  auto real = [&](double lo, double hi) {
    // Mix of short decimals and full-precision values.
    const double x = lo + (hi - lo) * rng.uniform();
    return rng.uniform() < 0.5 ? std::round(x * 100.0) / 100.0 : x;
  };
  RiskScenario s;
  s.name = rng.uniform() < 0.5 ? "plain" : "quote \" and \\ slash";
  const auto counts = rng.index(3);
  const auto probs = 1 + rng.index(4);
  int id = 0;
  for (std::size_t i = 0; i < counts; ++i) {
    const double a = real(0, 5);
    s.steps.push_back({"c" + std::to_string(id++), StepKind::count,
                       rng.uniform() < 0.5 ? DistributionExpr::point(a) : DistributionExpr::uniform(a, a + 1 + real(0, 3)), ""});
  }
  for (std::size_t i = 0; i < probs; ++i) {
    Binding b;
    const double pick = rng.uniform();
    if (pick < 0.3) {
      b = CurveBinding{"curve" + std::to_string(rng.index(3)), real(1, 400), rng.uniform() < 0.5 ? 1.0 : real(0, 1)};
    } else if (pick < 0.6) {
      b = DistributionExpr{Family::beta, {real(0.1, 5), real(0.1, 5)}};
    } else if (pick < 0.8) {
      const double a = real(0, 0.4);
      b = DistributionExpr{Family::triangular, {a, a + 0.1, a + 0.5}};
    } else {
      b = DistributionExpr::point(real(0, 1));
    }
    s.steps.push_back({"p" + std::to_string(id++), StepKind::probability, b, ""});
  }
  s.steps.push_back({"loss", StepKind::loss, DistributionExpr{Family::lognormal, {real(-3, 15), real(0.1, 2)}}, ""});
  return s;
}

}  // namespace

TEST_CASE("pretty-print then parse is the identity") {
  CounterRng rng(2024, stream_id(StreamDomain::test, 11));
  for (int i = 0; i < 500; ++i) {
    const auto s = random_scenario(rng);
    REQUIRE(validate_scenario(s).has_value());
    const auto text = format_scenario(s);
    const auto back = parse_scenario(text);
    REQUIRE_MESSAGE(back.has_value(), text);
    CHECK(back.value() == s);
  }
}

TEST_CASE("parsing random bytes never crashes and errors stay in bounds") {
  CounterRng rng(7, stream_id(StreamDomain::test, 12));
  const std::string alphabet = "scenario step count probability loss curve fst access point(){}:=,.#\"\\0123456789eE+-\n\t ";
  for (int i = 0; i < 3000; ++i) {
    std::string src;
    const auto len = rng.index(200);
    const bool structured = rng.uniform() < 0.5;
    for (std::size_t k = 0; k < len; ++k) {
      src.push_back(structured ? alphabet[rng.index(alphabet.size())] : static_cast<char>(rng.index(256)));
    }
    const auto r = parse_scenario(src);
    if (!r) REQUIRE(span_in_bounds(src, r.error().span));
  }
}
