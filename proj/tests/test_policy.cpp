#include <doctest.h>

#include <cmath>
#include <random>

#include "codestop/errors.hpp"
#include "codestop/policy.hpp"
#include "oracles.hpp"

using namespace codestop;
using codestop::testing::direct_degeneration;

namespace {

PolicyConfig aime_tuned() {
  PolicyConfig cfg;
  cfg.ramp_steps = 5;
  cfg.r_min = 0.0;
  cfg.r_max = 0.95;
  cfg.tau = 7.1;
  cfg.delta = 0.55;
  return cfg;
}

StepObservation obs(int k, TokenCount t, double c) {
  StepObservation o;
  o.step_index = k;
  o.token_pos = t;
  o.confidence = c;
  return o;
}

// Runs the incremental accumulator over (T, c) pairs, returning every D_k.
std::vector<double> incremental_scores(const std::vector<TokenCount>& pos,
                                       const std::vector<double>& conf,
                                       const PolicyConfig& cfg) {
  DegenerationState state;
  std::vector<double> out;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    auto up = update_degeneration(state, obs(static_cast<int>(i + 1), pos[i], conf[i]), cfg);
    state = up.state;
    out.push_back(up.score);
  }
  return out;
}

}  // namespace

TEST_CASE("ramping threshold") {
  const PolicyConfig cfg = aime_tuned();
  CHECK(ramping_threshold(5, cfg) == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(ramping_threshold(10, cfg) == 0.95);
  CHECK(ramping_threshold(2, cfg) == doctest::Approx(0.38).epsilon(1e-12));
  CHECK(ramping_threshold(1, cfg) == doctest::Approx(0.19).epsilon(1e-12));

  SUBCASE("monotone and flat after the ramp for random configs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> steps(1, 60);
    for (int trial = 0; trial < 200; ++trial) {
      PolicyConfig c;
      c.r_min = unit(rng);
      c.r_max = c.r_min + (1.0 - c.r_min) * unit(rng);
      c.ramp_steps = steps(rng);
      double prev = -1.0;
      for (int k = 1; k <= 1000; ++k) {
        const double r = ramping_threshold(k, c);
        REQUIRE(r >= prev);
        REQUIRE(r >= c.r_min - 1e-15);
        REQUIRE(r <= c.r_max);
        if (k >= c.ramp_steps) REQUIRE(r == c.r_max);
        prev = r;
      }
    }
  }
}

TEST_CASE("instability indicator variants") {
  using V = InstabilityVariant;
  CHECK(instability_indicator(0.6, 0.5, V::TrendAware, 0.55) == 1.0);
  CHECK(instability_indicator(0.2, 0.4, V::TrendAware, 0.55) == 0.0);
  // 2*0.5 - 0.45 == 0.55 is not strictly below delta
  CHECK(instability_indicator(0.45, 0.5, V::TrendAware, 0.55) == 0.0);
  CHECK(instability_indicator(0.1, 0.7, V::ConfidenceComplement, 0.55) ==
        doctest::Approx(0.3));
  CHECK(instability_indicator(0.9, 0.5, V::LowConfidence, 0.55) == 1.0);
  CHECK(instability_indicator(0.9, 0.55, V::LowConfidence, 0.55) == 0.0);
  CHECK(instability_indicator(0.4, 0.7, V::ConfidenceDrop, 0.55) ==
        doctest::Approx(-0.3));

  CHECK_THROWS_AS(instability_indicator(0.5, 1.3, V::TrendAware, 0.55), ValidationError);
  CHECK_THROWS_AS(instability_indicator(0.5, -0.1, V::TrendAware, 0.55), ValidationError);
  CHECK_THROWS_AS(instability_indicator(NAN, 0.5, V::TrendAware, 0.55), ValidationError);
}

TEST_CASE("step weights") {
  using W = WeightVariant;
  CHECK(step_weight(100, 100, W::Log) == 1.0);
  CHECK(step_weight(200, 100, W::Log) == doctest::Approx(1.6931).epsilon(1e-4));
  CHECK(step_weight(200, 100, W::LogInverse) == doctest::Approx(0.3069).epsilon(1e-4));
  CHECK(step_weight(7, 3, W::Uniform) == 1.0);
  CHECK(step_weight(200, 100, W::NormalizedLog) == step_weight(200, 100, W::Log));
  CHECK_THROWS_AS(step_weight(100, 0, W::Uniform), ValidationError);
  CHECK_THROWS_AS(step_weight(50, 100, W::Log), ValidationError);
}

TEST_CASE("degeneration score on the three-step example") {
  const std::vector<TokenCount> pos{10, 20, 30};
  const std::vector<double> conf{0.2, 0.5, 0.3};

  // Frozen from the direct-summation oracle: v = (1, 0, 1),
  // D_3 = (ln 3 + 1) + (ln 1 + 1).
  const double frozen_log = 3.0986122886681098;
  REQUIRE(direct_degeneration(conf, pos, 3, InstabilityVariant::TrendAware,
                              WeightVariant::Log, 0.55) ==
          doctest::Approx(frozen_log).epsilon(1e-12));
  REQUIRE(direct_degeneration(conf, pos, 3, InstabilityVariant::TrendAware,
                              WeightVariant::Uniform, 0.55) == 2.0);

  PolicyConfig cfg = aime_tuned();
  auto d = incremental_scores(pos, conf, cfg);
  CHECK(std::fabs(d[2] - frozen_log) < 1e-9);
  CHECK(std::fabs(d[2] - 3.0986) < 1e-4);

  cfg.w_variant = WeightVariant::Uniform;
  d = incremental_scores(pos, conf, cfg);
  CHECK(d == std::vector<double>{1.0, 1.0, 2.0});
}

TEST_CASE("all-zero indicators give zero score") {
  PolicyConfig cfg;
  cfg.v_variant = InstabilityVariant::LowConfidence;
  for (auto w : {WeightVariant::Log, WeightVariant::Uniform, WeightVariant::LogInverse,
                 WeightVariant::NormalizedLog}) {
    cfg.w_variant = w;
    auto d = incremental_scores({5, 50, 500}, {0.9, 0.95, 0.99}, cfg);
    CHECK(d == std::vector<double>{0.0, 0.0, 0.0});
  }
}

TEST_CASE("incremental score matches direct summation for every variant") {
  std::mt19937_64 rng(2024);
  const InstabilityVariant vs[] = {
      InstabilityVariant::TrendAware, InstabilityVariant::LowConfidence,
      InstabilityVariant::ConfidenceComplement, InstabilityVariant::ConfidenceDrop};
  const WeightVariant ws[] = {WeightVariant::Log, WeightVariant::Uniform,
                              WeightVariant::LogInverse, WeightVariant::NormalizedLog};
  for (int trial = 0; trial < 200; ++trial) {
    const Trajectory t = testing::random_trajectory(rng, 120);
    const auto conf = testing::confidences(t);
    const auto pos = testing::positions(t);
    for (auto v : vs) {
      for (auto w : ws) {
        PolicyConfig cfg;
        cfg.v_variant = v;
        cfg.w_variant = w;
        const auto d = incremental_scores(pos, conf, cfg);
        for (std::size_t k = 1; k <= d.size(); ++k) {
          const double expect = direct_degeneration(conf, pos, k, v, w, cfg.delta);
          REQUIRE(std::fabs(d[k - 1] - expect) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("update_degeneration rejects bad input without touching state") {
  PolicyConfig cfg;
  auto first = update_degeneration({}, obs(1, 10, 0.4), cfg);
  CHECK_THROWS_WITH_AS(update_degeneration(first.state, obs(2, 10, 0.4), cfg),
                       doctest::Contains("token_pos not strictly increasing"),
                       ValidationError);
  CHECK_THROWS_AS(update_degeneration(first.state, obs(2, 20, 1.5), cfg), ValidationError);
  CHECK_THROWS_AS(update_degeneration({}, obs(1, 0, 0.5), cfg), ValidationError);
  CHECK(first.state.step_count == 1);
}

TEST_CASE("decide") {
  PolicyConfig cfg = aime_tuned();

  SUBCASE("confidence stop past the ramp") {
    DegenerationState s;
    for (int k = 1; k <= 5; ++k) s = decide(s, obs(k, k * 100, 0.7), cfg).state;
    auto step = decide(s, obs(6, 600, 0.97), cfg);
    CHECK(step.decision.action == Action::Stop);
    CHECK(step.decision.reason == StopReason::Confidence);
    CHECK(step.r_k == 0.95);
  }

  SUBCASE("degeneration stop and continue") {
    // Five flagged steps: D is about 8.2 at step 5; r_5 = 0.95 not reached.
    DegenerationState s;
    StopDecision last;
    for (int k = 1; k <= 5; ++k) {
      auto step = decide(s, obs(k, k * 100, 0.1), cfg);
      s = step.state;
      last = step.decision;
      if (k < 4) CHECK(last.action == Action::Continue);
    }
    CHECK(last.reason == StopReason::Degeneration);
    CHECK(last.threshold_value == 7.1);
    CHECK(last.score_value >= 7.1);
  }

  SUBCASE("confidence wins a tie") {
    cfg.tau = 0.0;
    auto step = decide({}, obs(1, 10, 0.99), cfg);
    CHECK(step.decision.reason == StopReason::Confidence);
  }

  SUBCASE("tau of zero stops at step one") {
    cfg.tau = 0.0;
    auto step = decide({}, obs(1, 10, 0.1), cfg);  // below r_1 = 0.19
    CHECK(step.decision.reason == StopReason::Degeneration);
  }

  SUBCASE("continue leaves reason none") {
    auto step = decide({}, obs(1, 10, 0.1), cfg);
    CHECK(step.decision.action == Action::Continue);
    CHECK(step.decision.reason == StopReason::None);
  }
}

TEST_CASE("config validation") {
  PolicyConfig cfg;
  cfg.r_min = 0.96;
  CHECK_THROWS_WITH(validate(cfg), doctest::Contains("r_min"));
  cfg = {};
  cfg.ramp_steps = 0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = {};
  cfg.delta = 1.5;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = {};
  cfg.tau = kInfinity;
  CHECK_NOTHROW(validate(cfg));
  CHECK(parse_rule("deer_fixed_step") == Rule::DeerFixedStep);
  CHECK_THROWS_AS(parse_weight_variant("cubic"), ValidationError);
}
