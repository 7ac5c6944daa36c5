#pragma once

// Brute-force reference computations. Nothing here uses the forward/backward
// recursions; every quantity is a sum over explicitly enumerated hidden paths.

#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "trustrepair/iohmm.hpp"
#include "trustrepair/simulator.hpp"
#include "trustrepair/trust_domain.hpp"

namespace trustrepair::testing {

/// Calls f(path, joint) for every hidden path with
/// joint = P(path, y_1..y_T | inputs).
template <typename F>
void for_each_path(const iohmm::ModelParams& p, const iohmm::SequenceData& seq, F&& f) {
  const std::size_t n = p.spec().n_states;
  const std::size_t T = seq.length();
  std::vector<std::size_t> path(T, 0);
  while (true) {
    double joint = p.initial()[path[0]] *
                   p.emission(seq.emission_inputs[0], path[0], seq.outputs[0]);
    for (std::size_t t = 1; t < T; ++t) {
      joint *= p.transition(seq.transition_inputs[t - 1], path[t - 1], path[t]);
      joint *= p.emission(seq.emission_inputs[t], path[t], seq.outputs[t]);
    }
    f(path, joint);
    std::size_t i = 0;
    while (i < T && ++path[i] == n) path[i++] = 0;
    if (i == T) break;
  }
}

inline double enumerate_likelihood(const iohmm::ModelParams& p, const iohmm::SequenceData& seq) {
  double total = 0.0;
  for_each_path(p, seq, [&](const auto&, double joint) { total += joint; });
  return total;
}

/// P(S_t = s | y_1..y_{t-1}) for t = 1..T+1 (the last uses e_T when present).
inline std::vector<std::vector<double>> enumerate_predictive(const iohmm::ModelParams& p,
                                                              const iohmm::SequenceData& seq) {
  const std::size_t n = p.spec().n_states;
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t <= seq.transition_inputs.size(); ++t) {
    std::vector<double> b(n, 0.0);
    if (t == 0) {
      for (std::size_t s = 0; s < n; ++s) b[s] = p.initial()[s];
      out.push_back(b);
      continue;
    }
    // Joint over paths of length t+1 with only the first t outputs observed.
    iohmm::SequenceData prefix;
    prefix.outputs.assign(seq.outputs.begin(), seq.outputs.begin() + static_cast<long>(t));
    prefix.emission_inputs.assign(seq.emission_inputs.begin(),
                                  seq.emission_inputs.begin() + static_cast<long>(t));
    prefix.transition_inputs.assign(seq.transition_inputs.begin(),
                                    seq.transition_inputs.begin() + static_cast<long>(t - 1));
    double z = 0.0;
    for_each_path(p, prefix, [&](const std::vector<std::size_t>& path, double joint) {
      for (std::size_t s = 0; s < n; ++s) {
        const double w = joint * p.transition(seq.transition_inputs[t - 1], path.back(), s);
        b[s] += w;
        z += w;
      }
    });
    for (double& v : b) v /= z;
    out.push_back(b);
  }
  return out;
}

/// Model with strictly positive entries drawn from `rng`.
inline iohmm::ModelParams random_positive_model(const iohmm::AlphabetSpec& spec,
                                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  iohmm::ModelParams p(spec);
  auto fill = [&](std::span<double> row) {
    double z = 0.0;
    for (double& v : row) z += (v = u(rng));
    for (double& v : row) v /= z;
  };
  fill(p.initial());
  for (std::size_t in = 0; in < spec.n_transition_inputs; ++in)
    for (std::size_t s = 0; s < spec.n_states; ++s) fill(p.transition_row(in, s));
  for (std::size_t c = 0; c < spec.n_emission_inputs; ++c)
    for (std::size_t s = 0; s < spec.n_states; ++s) fill(p.emission_row(c, s));
  return p;
}

inline iohmm::SequenceData random_sequence(const iohmm::AlphabetSpec& spec, std::size_t T,
                                           std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> y(0, spec.n_outputs - 1);
  std::uniform_int_distribution<std::size_t> c(0, spec.n_emission_inputs - 1);
  std::uniform_int_distribution<std::size_t> e(0, spec.n_transition_inputs - 1);
  iohmm::SequenceData seq;
  for (std::size_t t = 0; t < T; ++t) {
    seq.outputs.push_back(y(rng));
    seq.emission_inputs.push_back(c(rng));
    if (t + 1 < T) seq.transition_inputs.push_back(e(rng));
  }
  return seq;
}

/// Exact expected total delivery score over every trust path, complexity,
/// action, outcome and message. `message_probs(k)` gives the distribution
/// over kRepairStrategies for the (k+1)-th failure.
template <typename MessageProbs>
double enumerate_expected_score(const iohmm::ModelParams& p, double success_probability,
                                double p_high, int n_trials, MessageProbs&& message_probs) {
  const auto auto_idx = index_of(HumanAction::AutoDeploy);
  const auto manual_idx = index_of(HumanAction::Manual);
  // value(t, s, k): expected score of trials t..n given trust s at trial t and
  // k failures so far.
  auto value = [&](auto&& self, int t, std::size_t s, std::size_t k) -> double {
    if (t > n_trials) return 0.0;
    auto next = [&](TransitionEvent e, std::size_t k2) {
      double v = 0.0;
      for (std::size_t s2 = 0; s2 < 2; ++s2) {
        const double w = p.transition(index_of(e), s, s2);
        if (w > 0.0) v += w * self(self, t + 1, s2, k2);
      }
      return v;
    };
    double total = 0.0;
    for (Complexity c : {Complexity::Low, Complexity::High}) {
      const double pc = c == Complexity::High ? p_high : 1.0 - p_high;
      const double pa = p.emission(index_of(c), s, auto_idx);
      const double pm = p.emission(index_of(c), s, manual_idx);
      double v = pm * (30.0 + next(TransitionEvent::Manual, k));
      double fail = -100.0;
      const std::array<double, 4> mp = message_probs(k);
      for (std::size_t m = 0; m < 4; ++m) {
        if (mp[m] > 0.0) {
          fail += mp[m] * next(encode_event(HumanAction::AutoDeploy, Outcome::Failure,
                                            kRepairStrategies[m]),
                               k + 1);
        }
      }
      v += pa * (success_probability * (50.0 + next(TransitionEvent::AutoSuccess, k)) +
                 (1.0 - success_probability) * fail);
      total += pc * v;
    }
    return total;
  };
  double total = 0.0;
  for (std::size_t s = 0; s < 2; ++s) total += p.initial()[s] * value(value, 1, s, 0);
  return total;
}


/// Conditional empirical frequencies of simulated sessions, keyed by the
/// hidden trust state that generated each draw.
struct FrequencyTable {
  // [complexity][state] -> {auto count, total}
  std::array<std::array<std::array<std::size_t, 2>, 2>, 2> emission{};
  // [event][state] -> {to-high count, total}
  std::array<std::array<std::array<std::size_t, 2>, 2>, 6> transition{};

  void add(const SimulatedSession& s) {
    const auto& trials = s.log.trials;
    for (std::size_t t = 0; t < trials.size(); ++t) {
      const std::size_t state = index_of(s.hidden_trust[t]);
      auto& e = emission[index_of(trials[t].complexity)][state];
      e[0] += trials[t].human_action == HumanAction::AutoDeploy;
      ++e[1];
      if (t + 1 < trials.size()) {
        auto& tr = transition[index_of(trials[t].event())][state];
        tr[0] += s.hidden_trust[t + 1] == TrustState::High;
        ++tr[1];
      }
    }
  }
};

}  // namespace trustrepair::testing
