#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "trustrepair/random.hpp"
#include "trustrepair/simulator.hpp"

namespace {

using namespace trustrepair;
using trustrepair::testing::enumerate_expected_score;
using trustrepair::testing::FrequencyTable;

std::array<double, 4> fixed_probs(RobotMessage m) {
  std::array<double, 4> p{};
  for (std::size_t i = 0; i < 4; ++i) p[i] = kRepairStrategies[i] == m ? 1.0 : 0.0;
  return p;
}

TEST(Random, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Random, CategoricalSkipsZeroMass) {
  const std::vector<double> probs{0.0, 0.3, 0.0, 0.7};
  EXPECT_EQ(categorical_from_uniform(probs, 0.0), 1u);
  EXPECT_EQ(categorical_from_uniform(probs, 0.299), 1u);
  EXPECT_EQ(categorical_from_uniform(probs, 0.31), 3u);
  EXPECT_EQ(categorical_from_uniform(probs, 0.9999999999), 3u);
}

TEST(Policy, ParseAndName) {
  for (const char* text : {"fixed:short", "fixed:long", "fixed:apology", "fixed:denial", "uniform",
                           "round-robin", "scripted:long,denial"}) {
    EXPECT_EQ(policy_name(parse_policy(text)), text);
  }
  EXPECT_THROW(parse_policy("fixed:none"), ConfigError);
  EXPECT_THROW(parse_policy("greedy"), ConfigError);
}

TEST(Policy, RoundRobinCycles) {
  MessageSelector sel(RoundRobin{});
  Rng rng(1);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(sel.next(rng), kRepairStrategies[i % 4]);
  EXPECT_EQ(sel.issued(), 8u);
}

TEST(Policy, ScriptedRunsOut) {
  EnvConfig env;
  env.success_probability = 0.0;
  env.n_trials = 60;
  const auto p = paper_reference_params();
  EXPECT_THROW(simulate_session(p, env, Scripted{{RobotMessage::Denial}}), PolicyExhaustedError);
}

TEST(Env, Validation) {
  EnvConfig env;
  env.n_trials = 0;
  EXPECT_THROW(validate_env(env), ConfigError);
  env.n_trials = 3;
  env.success_probability = 1.5;
  EXPECT_THROW(validate_env(env), ConfigError);
  env.success_probability = 0.5;
  env.complexity = std::vector<Complexity>{Complexity::Low};
  EXPECT_THROW(validate_env(env), ConfigError);
}

TEST(Simulate, DeterministicAndConsistent) {
  const auto p = paper_reference_params();
  EnvConfig env;
  env.seed = 42;
  const auto a = simulate_session(p, env, UniformRandom{});
  const auto b = simulate_session(p, env, UniformRandom{});
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.hidden_trust, b.hidden_trust);
  EXPECT_EQ(a.hidden_trust.size(), 60u);
  EXPECT_NO_THROW(validate_session(a.log));
  int total = 0;
  for (const auto& t : a.log.trials) total += t.delivery_score();
  EXPECT_EQ(total, a.total_delivery_score);
  env.seed = 43;
  EXPECT_NE(simulate_session(p, env, UniformRandom{}).log, a.log);
}

TEST(Simulate, PoliciesShareComplexityAndOutcomeDraws) {
  const auto p = paper_reference_params();
  EnvConfig env;
  env.seed = 7;
  const auto a = simulate_session(p, env, FixedStrategy{RobotMessage::LongExplanation});
  const auto b = simulate_session(p, env, FixedStrategy{RobotMessage::Denial});
  for (std::size_t t = 0; t < a.log.trials.size(); ++t) {
    EXPECT_EQ(a.log.trials[t].complexity, b.log.trials[t].complexity);
  }
}

TEST(Simulate, ScheduleIsFollowed) {
  EnvConfig env;
  env.n_trials = 4;
  env.complexity = std::vector<Complexity>{Complexity::High, Complexity::Low, Complexity::Low,
                                           Complexity::High};
  const auto s = simulate_session(paper_reference_params(), env, RoundRobin{});
  EXPECT_EQ(s.log.trials[0].complexity, Complexity::High);
  EXPECT_EQ(s.log.trials[1].complexity, Complexity::Low);
  EXPECT_EQ(s.log.trials[3].complexity, Complexity::High);
}

TEST(Simulate, CohortIds) {
  EnvConfig env;
  env.n_trials = 2;
  const auto cohort = simulate_cohort(paper_reference_params(), env, UniformRandom{}, 3);
  ASSERT_EQ(cohort.size(), 3u);
  EXPECT_EQ(cohort[0].log.participant_id, "sim-000");
  EXPECT_EQ(cohort[2].log.participant_id, "sim-002");
}

TEST(EvaluatePolicy, MatchesExhaustiveEnumeration) {
  const auto p = paper_reference_params();
  for (int n = 1; n <= 3; ++n) {
    EnvConfig env;
    env.n_trials = n;
    env.seed = static_cast<std::uint64_t>(100 + n);
    env.success_probability = 0.6;
    env.complexity = IidComplexity{0.3};
    const std::vector<MessagePolicy> policies{FixedStrategy{RobotMessage::ShortExplanation},
                                              FixedStrategy{RobotMessage::ApologyPromise},
                                              UniformRandom{}, RoundRobin{}};
    const auto est = evaluate_policy(p, env, policies, 20000);
    const double expected[] = {
        enumerate_expected_score(p, 0.6, 0.3, n,
                                 [](std::size_t) { return fixed_probs(RobotMessage::ShortExplanation); }),
        enumerate_expected_score(p, 0.6, 0.3, n,
                                 [](std::size_t) { return fixed_probs(RobotMessage::ApologyPromise); }),
        enumerate_expected_score(p, 0.6, 0.3, n,
                                 [](std::size_t) { return std::array<double, 4>{0.25, 0.25, 0.25, 0.25}; }),
        enumerate_expected_score(p, 0.6, 0.3, n,
                                 [](std::size_t k) { return fixed_probs(kRepairStrategies[k % 4]); }),
    };
    for (std::size_t i = 0; i < policies.size(); ++i) {
      EXPECT_NEAR(est[i].mean, expected[i], 3.0 * est[i].std_error)
          << policy_name(policies[i]) << " n_trials=" << n;
    }
  }
}

TEST(EvaluatePolicy, ManualOnlyModelIsExact) {
  auto p = paper_reference_params();
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t s = 0; s < 2; ++s) {
      p.emission_row(c, s)[0] = 0.0;
      p.emission_row(c, s)[1] = 1.0;
    }
  }
  EnvConfig env;
  env.n_trials = 10;
  const std::vector<MessagePolicy> policies{UniformRandom{}};
  const auto est = evaluate_policy(p, env, policies, 50);
  EXPECT_EQ(est[0].mean, 300.0);
  EXPECT_EQ(est[0].std_error, 0.0);
}

TEST(Simulate, FrequenciesApproachParameters) {
  const auto p = paper_reference_params();
  EnvConfig env;
  env.n_trials = 8;
  env.success_probability = 0.5;
  FrequencyTable table;
  for (const auto& s : simulate_cohort(p, env, RoundRobin{}, 5000)) table.add(s);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& cell = table.emission[c][s];
      ASSERT_GT(cell[1], 1000u);
      EXPECT_NEAR(static_cast<double>(cell[0]) / static_cast<double>(cell[1]), p.emission(c, s, 0),
                  0.05);
    }
  }
}

}  // namespace
