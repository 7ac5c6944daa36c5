#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "trustrepair/iohmm.hpp"

namespace {

using namespace trustrepair::iohmm;
using trustrepair::testing::enumerate_likelihood;
using trustrepair::testing::enumerate_predictive;
using trustrepair::testing::for_each_path;
using trustrepair::testing::random_positive_model;
using trustrepair::testing::random_sequence;

const AlphabetSpec kSmall{2, 3, 2, 2};
const AlphabetSpec kWide{3, 2, 3, 4};

TEST(ModelParams, UniformIsValid) {
  EXPECT_NO_THROW(validate_params(ModelParams::uniform(kWide)));
}

TEST(ModelParams, RowSumViolationNamesTheRow) {
  auto p = ModelParams::uniform(kSmall);
  p.transition_row(2, 1)[0] = 0.9;
  try {
    validate_params(p);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("transition"), std::string::npos) << what;
    EXPECT_NE(what.find("1.4"), std::string::npos) << what;
  }
}

TEST(ModelParams, NegativeEntryRejected) {
  auto p = ModelParams::uniform(kSmall);
  p.emission_row(0, 0)[0] = -0.5;
  p.emission_row(0, 0)[1] = 1.5;
  EXPECT_THROW(validate_params(p), ModelError);
}

TEST(ModelParams, DimensionMismatchRejected) {
  ModelParams empty;
  EXPECT_THROW(validate_params(empty), ModelError);
}

TEST(Sequence, LayoutIsChecked) {
  SequenceData seq{{0, 1}, {0, 1}, {}};
  EXPECT_THROW(validate_sequence(kSmall, seq), SequenceError);
  seq.transition_inputs = {3};
  EXPECT_THROW(validate_sequence(kSmall, seq), SequenceError);
  seq.transition_inputs = {2};
  EXPECT_NO_THROW(validate_sequence(kSmall, seq));
  EXPECT_THROW(validate_sequence(kSmall, SequenceData{}), SequenceError);
}

TEST(Forward, MatchesPathEnumeration) {
  std::mt19937_64 rng(11);
  for (const auto& spec : {kSmall, kWide}) {
    for (int trial = 0; trial < 40; ++trial) {
      const auto p = random_positive_model(spec, rng);
      const auto seq = random_sequence(spec, 1 + trial % 7, rng);
      const auto fwd = forward_scaled(p, seq);
      EXPECT_NEAR(fwd.log_likelihood, std::log(enumerate_likelihood(p, seq)), 1e-10);
    }
  }
}

TEST(Forward, LongSequenceDoesNotUnderflow) {
  std::mt19937_64 rng(3);
  const auto p = random_positive_model(kWide, rng);
  const auto seq = random_sequence(kWide, 5000, rng);
  const auto fwd = forward_scaled(p, seq);
  EXPECT_TRUE(std::isfinite(fwd.log_likelihood));
  EXPECT_LT(fwd.log_likelihood, -1000.0);
}

TEST(Forward, ImpossibleObservationReportsStep) {
  auto p = ModelParams::uniform(kSmall);
  for (std::size_t s = 0; s < 2; ++s) {
    p.emission_row(1, s)[0] = 1.0;
    p.emission_row(1, s)[1] = 0.0;
  }
  const SequenceData seq{{0, 0, 1}, {0, 0, 1}, {0, 0}};
  try {
    forward_scaled(p, seq);
    FAIL() << "expected ImpossibleSequenceError";
  } catch (const ImpossibleSequenceError& e) {
    EXPECT_EQ(e.step(), 2u);
  }
}

TEST(Smoothing, MatchesPathEnumeration) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_positive_model(kWide, rng);
    const auto seq = random_sequence(kWide, 1 + trial % 6, rng);
    const auto fwd = forward_scaled(p, seq);
    const auto gamma = smoothing_posteriors(fwd.alpha, backward_scaled(p, seq, fwd.scale));

    std::vector<std::vector<double>> expected(seq.length(), std::vector<double>(3, 0.0));
    double z = 0.0;
    for_each_path(p, seq, [&](const std::vector<std::size_t>& path, double joint) {
      z += joint;
      for (std::size_t t = 0; t < path.size(); ++t) expected[t][path[t]] += joint;
    });
    for (std::size_t t = 0; t < seq.length(); ++t) {
      for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(gamma[t][s], expected[t][s] / z, 1e-12);
    }
  }
}

TEST(Filter, MatchesPathEnumeration) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_positive_model(kWide, rng);
    auto seq = random_sequence(kWide, 1 + trial % 6, rng);
    if (trial % 2 == 1) {
      seq.transition_inputs.push_back(static_cast<std::size_t>(trial) % kWide.n_transition_inputs);
    }
    const auto beliefs = filter_predictive(p, seq);
    const auto expected = enumerate_predictive(p, seq);
    ASSERT_EQ(beliefs.size(), expected.size());
    for (std::size_t t = 0; t < beliefs.size(); ++t) {
      for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(beliefs[t][s], expected[t][s], 1e-12);
    }
  }
}

TEST(Filter, EmptyPrefixGivesInitial) {
  std::mt19937_64 rng(1);
  const auto p = random_positive_model(kSmall, rng);
  const auto beliefs = filter_predictive(p, SequenceData{});
  ASSERT_EQ(beliefs.size(), 1u);
  EXPECT_EQ(beliefs[0][0], p.initial()[0]);
}

TEST(Filter, StepwiseUpdatesAgreeWithBatch) {
  std::mt19937_64 rng(14);
  const auto p = random_positive_model(kSmall, rng);
  auto seq = random_sequence(kSmall, 12, rng);
  seq.transition_inputs.push_back(1);
  const auto batch = filter_predictive(p, seq);
  Belief b(p.initial().begin(), p.initial().end());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    EXPECT_EQ(b, batch[t]);
    b = propagate(p, condition_on_output(p, b, seq.emission_inputs[t], seq.outputs[t], t),
                  seq.transition_inputs[t]);
  }
  EXPECT_EQ(b, batch.back());
}

// One EM step against expected counts accumulated over enumerated paths.
TEST(BaumWelch, SingleStepMatchesEnumeratedExpectedCounts) {
  std::mt19937_64 rng(21);
  const auto init = random_positive_model(kSmall, rng);
  std::vector<SequenceData> data;
  for (int i = 0; i < 4; ++i) data.push_back(random_sequence(kSmall, 3 + i, rng));

  const std::size_t S = 2, Y = 2;
  std::vector<double> pi(S, 0.0);
  std::vector<double> trans(kSmall.n_transition_inputs * S * S, 0.0);
  std::vector<double> emit(kSmall.n_emission_inputs * S * Y, 0.0);
  for (const auto& seq : data) {
    const double z = enumerate_likelihood(init, seq);
    for_each_path(init, seq, [&](const std::vector<std::size_t>& path, double joint) {
      const double w = joint / z;
      pi[path[0]] += w;
      for (std::size_t t = 0; t < path.size(); ++t) {
        emit[(seq.emission_inputs[t] * S + path[t]) * Y + seq.outputs[t]] += w;
        if (t + 1 < path.size()) trans[(seq.transition_inputs[t] * S + path[t]) * S + path[t + 1]] += w;
      }
    });
  }

  FitConfig config;
  config.max_iterations = 1;
  config.tolerance = 1e-300;
  config.smoothing = 0.0;
  const auto report = baum_welch(kSmall, data, config, init);
  const auto counts = count_input_symbols(kSmall, data);

  const double pi_z = pi[0] + pi[1];
  for (std::size_t s = 0; s < S; ++s) EXPECT_NEAR(report.params.initial()[s], pi[s] / pi_z, 1e-12);
  for (std::size_t u = 0; u < kSmall.n_transition_inputs; ++u) {
    for (std::size_t s = 0; s < S; ++s) {
      const double z = trans[(u * S + s) * S] + trans[(u * S + s) * S + 1];
      for (std::size_t s2 = 0; s2 < S; ++s2) {
        const double expected =
            counts.transition[u] == 0 ? init.transition(u, s, s2) : trans[(u * S + s) * S + s2] / z;
        EXPECT_NEAR(report.params.transition(u, s, s2), expected, 1e-12);
      }
    }
  }
  for (std::size_t c = 0; c < kSmall.n_emission_inputs; ++c) {
    for (std::size_t s = 0; s < S; ++s) {
      const double z = emit[(c * S + s) * Y] + emit[(c * S + s) * Y + 1];
      for (std::size_t y = 0; y < Y; ++y) {
        EXPECT_NEAR(report.params.emission(c, s, y), emit[(c * S + s) * Y + y] / z, 1e-12);
      }
    }
  }
  ASSERT_EQ(report.log_likelihood_trace.size(), 2u);
  EXPECT_NEAR(report.log_likelihood_trace[1], total_log_likelihood(report.params, data), 1e-12);
}

TEST(BaumWelch, TraceIsNonDecreasing) {
  std::mt19937_64 rng(22);
  for (int d = 0; d < 5; ++d) {
    const auto truth = random_positive_model(kWide, rng);
    std::vector<SequenceData> data;
    for (int i = 0; i < 10; ++i) {
      auto seq = random_sequence(kWide, 30, rng);
      seq.outputs = sample_sequence(truth, seq.emission_inputs, seq.transition_inputs, rng()).outputs;
      data.push_back(seq);
    }
    FitConfig config;
    config.restarts = 3;
    config.seed = static_cast<std::uint64_t>(d);
    const auto report = baum_welch(kWide, data, config);
    for (const auto& trace : report.restart_traces) {
      for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i] - trace[i - 1], -1e-9);
    }
  }
}

TEST(BaumWelch, BestRestartIsReported) {
  std::mt19937_64 rng(23);
  std::vector<SequenceData> data;
  for (int i = 0; i < 5; ++i) data.push_back(random_sequence(kSmall, 20, rng));
  FitConfig config;
  config.restarts = 6;
  const auto report = baum_welch(kSmall, data, config);
  ASSERT_EQ(report.restart_log_likelihoods.size(), 6u);
  const double best = *std::max_element(report.restart_log_likelihoods.begin(),
                                        report.restart_log_likelihoods.end());
  EXPECT_EQ(report.log_likelihood(), best);
  EXPECT_EQ(report.restart_log_likelihoods[report.best_restart], best);
  for (std::size_t r = 0; r < report.best_restart; ++r) {
    EXPECT_LT(report.restart_log_likelihoods[r], best);
  }
}

TEST(BaumWelch, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(24);
  std::vector<SequenceData> data;
  for (int i = 0; i < 5; ++i) data.push_back(random_sequence(kSmall, 20, rng));
  FitConfig config;
  config.restarts = 5;
  config.seed = 9;
  config.threads = 1;
  const auto serial = baum_welch(kSmall, data, config);
  config.threads = 4;
  const auto parallel = baum_welch(kSmall, data, config);
  EXPECT_EQ(serial.params, parallel.params);
  EXPECT_EQ(serial.log_likelihood_trace, parallel.log_likelihood_trace);
}

TEST(BaumWelch, UnseenInputRowsKeepInitialValues) {
  std::mt19937_64 rng(25);
  const auto init = random_positive_model(kSmall, rng);
  std::vector<SequenceData> data{{{0, 1, 0}, {0, 0, 0}, {0, 1}}};
  FitConfig config;
  config.max_iterations = 5;
  const auto report = baum_welch(kSmall, data, config, init);
  EXPECT_EQ(report.input_symbol_counts.transition[2], 0u);
  EXPECT_EQ(report.input_symbol_counts.emission[1], 0u);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t s2 = 0; s2 < 2; ++s2) {
      EXPECT_EQ(report.params.transition(2, s, s2), init.transition(2, s, s2));
    }
    EXPECT_EQ(report.params.emission(1, s, 0), init.emission(1, s, 0));
  }
}

TEST(BaumWelch, RejectsBadConfigAndData) {
  FitConfig config;
  config.max_iterations = 0;
  std::vector<SequenceData> data{{{0}, {0}, {}}};
  EXPECT_THROW(baum_welch(kSmall, data, config), FitError);
  EXPECT_THROW(baum_welch(kSmall, std::span<const SequenceData>{}, FitConfig{}), FitError);
}

TEST(Sampling, DeterministicPerSeed) {
  std::mt19937_64 rng(4);
  const auto p = random_positive_model(kSmall, rng);
  const std::vector<std::size_t> c{0, 1, 1, 0, 1};
  const std::vector<std::size_t> e{0, 1, 2, 0};
  const auto a = sample_sequence(p, c, e, 77);
  const auto b = sample_sequence(p, c, e, 77);
  EXPECT_EQ(a.outputs, b.outputs);
  EXPECT_EQ(a.hidden_states, b.hidden_states);
  EXPECT_THROW(sample_sequence(p, c, c, 1), SequenceError);
}

TEST(Canonicalize, OrdersByStatisticAndPermutesEverything) {
  std::mt19937_64 rng(5);
  auto p = random_positive_model(kWide, rng);
  const OrderingRule rule{1, 2};
  const auto canon = canonicalize_states(p, rule);
  EXPECT_FALSE(canon.tie);
  for (std::size_t s = 0; s + 1 < 3; ++s) {
    EXPECT_GT(canon.params.emission(1, s, 2), canon.params.emission(1, s + 1, 2));
  }
  // Likelihoods are invariant under relabeling.
  const auto seq = random_sequence(kWide, 8, rng);
  EXPECT_NEAR(forward_scaled(p, seq).log_likelihood,
              forward_scaled(canon.params, seq).log_likelihood, 1e-12);
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto shuffled = permute_states(p, perm);
  EXPECT_EQ(canonicalize_states(shuffled, rule).params, canon.params);
}

TEST(Canonicalize, TieFallsBackToIdentity) {
  auto p = ModelParams::uniform(kSmall);
  const auto canon = canonicalize_states(p, OrderingRule{0, 0});
  EXPECT_TRUE(canon.tie);
  EXPECT_EQ(canon.permutation, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(canon.params, p);
}

}  // namespace
