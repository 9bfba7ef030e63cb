#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "trustroute/decision.hpp"

using namespace trustroute;

namespace {

MatchScores ms(double s1, double s2, double s3, double s4) { return {s1, s2, s3, s4}; }
SoftBias bias(double r) { return {r, 1 - r, ""}; }

}  // namespace

TEST_CASE("conflict detection examples") {
  CHECK(detect_conflict(ms(0.8, 0, 0, 0.7)));
  CHECK_FALSE(detect_conflict(ms(0.2, 0, 0, 0.3)));
  CHECK_FALSE(detect_conflict(ms(0.5, 0, 0, 0.5)));
}

TEST_CASE("trust score examples") {
  auto t = trust_scores({0.8, 0.2, ""}, ms(0, 0.1, 0.9, 0));
  CHECK(t.t_ret == doctest::Approx(1.44));
  CHECK(t.t_llm == doctest::Approx(0.04));
  t = trust_scores({0.2, 0.8, ""}, ms(0, 0.9, 0.1, 0));
  CHECK(t.t_ret == doctest::Approx(0.04));
  CHECK(t.t_llm == doctest::Approx(1.44));
  t = trust_scores({0.5, 0.5, ""}, ms(0, 0.5, 0.5, 0));
  CHECK(t.t_ret == 0.5);
  CHECK(t.t_llm == 0.5);
}

TEST_CASE("decision examples") {
  const Thresholds thr;
  CHECK(decide({0.8, 0.2, ""}, ms(0.2, 0.1, 0.9, 0.3), thr, 0).outcome == Outcome::FE);
  CHECK(decide({0.2, 0.8, ""}, ms(0.1, 0.9, 0.1, 0.2), thr, 0).outcome == Outcome::FI);
  const auto band = ms(0.1, 0.2, 0.3, 0.1);
  const auto v = decide({0.5, 0.5, ""}, band, thr, 0);
  CHECK(v.outcome == Outcome::Reflect);
  CHECK(v.trust.t_ret == doctest::Approx(0.55));
  CHECK(decide({0.5, 0.5, ""}, band, thr, 2).outcome == Outcome::Reflect);
  const auto capped = decide({0.5, 0.5, ""}, band, thr, 3);
  CHECK(capped.outcome == Outcome::RA);
  CHECK(capped.trace.back().rule == "reflection_cap");
}

TEST_CASE("FA path still reports trust") {
  const auto v = decide({0.8, 0.2, ""}, ms(0.9, 0.1, 0.9, 0.9), {}, 0);
  CHECK(v.outcome == Outcome::FA);
  CHECK(v.trust.t_ret == doctest::Approx(1.44));
  CHECK(v.trace.front().rule == "conflict_detection");
}

TEST_CASE("threshold boundaries use the stated operators") {
  // Values chosen so the products are exact in binary floating point.
  const Thresholds thr{0.5, 1.0, 3};
  // t_ret = 1.0 * (0.5 + 1 - 0.5) = 1.0 = beta -> FE
  CHECK(decide(bias(1.0), ms(0, 0.5, 0.5, 0), thr, 0).outcome == Outcome::FE);
  // t_ret = 0.5 * (0.5 + 1 - 0.5) = 0.5 = alpha, t_llm = 0.5 -> tie goes to the retriever branch -> Reflect
  CHECK(decide(bias(0.5), ms(0, 0.5, 0.5, 0), thr, 0).outcome == Outcome::Reflect);
  // r_p = 0.0, g_p = 1.0, s2 = 0.25, s3 = 0.75: t_ret = 0, t_llm = 0.5 = alpha -> RA
  CHECK(decide(bias(0.0), ms(0, 0.25, 0.75, 0), thr, 0).outcome == Outcome::RA);
  // just above alpha on the llm side -> FI
  CHECK(decide(bias(0.0), ms(0, 0.25, 0.625, 0), thr, 0).outcome == Outcome::FI);
}

TEST_CASE("threshold validation") {
  CHECK_NOTHROW(Thresholds{}.validate());
  CHECK_THROWS_AS((Thresholds{0.5, 0.5, 3}.validate()), ContractError);
  CHECK_THROWS_AS((Thresholds{0.0, 1.0, 3}.validate()), ContractError);
  CHECK_THROWS_AS((Thresholds{0.5, 1.1, -1}.validate()), ContractError);
  CHECK_THROWS_AS(to_strategy(Outcome::Reflect), ContractError);
  CHECK(to_strategy(Outcome::FE) == Strategy::FE);
  CHECK(to_string(Outcome::Reflect) == "Reflect");
}

TEST_CASE("random points agree with the prose oracle and stay total") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0, 1);
  const Thresholds thr;
  for (int i = 0; i < 200000; ++i) {
    const double r = u(rng);
    const auto s = ms(u(rng), u(rng), u(rng), u(rng));
    const int used = static_cast<int>(rng() % 4);
    const auto v = decide(bias(r), s, thr, used);
    const auto expect = oracle::decide(r, 1 - r, s.s1, s.s2, s.s3, s.s4, thr.alpha, thr.beta, thr.max_reflections, used);
    REQUIRE(std::string(to_string(v.outcome)) == expect);
    REQUIRE(v.trust.t_ret + v.trust.t_llm <= 2.0 + 1e-12);
  }
}

TEST_CASE("raising s3 never moves FE toward RA") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  const Thresholds thr;
  for (int i = 0; i < 20000; ++i) {
    const double r = u(rng);
    auto s = ms(u(rng) * 0.4, u(rng), u(rng), u(rng) * 0.4);
    const auto before = decide(bias(r), s, thr, 0);
    if (before.outcome != Outcome::FE) continue;
    s.s3 = std::min(1.0, s.s3 + u(rng) * (1 - s.s3));
    const auto after = decide(bias(r), s, thr, 0);
    CHECK((after.outcome == Outcome::FE || after.outcome == Outcome::FA));
  }
}

TEST_CASE("trust sum reaches two only at the corner") {
  const auto t = trust_scores(bias(1.0), ms(0, 0, 1, 0));
  CHECK(t.t_ret + t.t_llm == 2.0);
  const auto m = trust_scores(bias(0.5), ms(0, 0.3, 0.6, 0));
  CHECK(m.t_ret + m.t_llm < 2.0);
}
