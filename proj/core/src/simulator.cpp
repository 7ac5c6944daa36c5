#include "trustrepair/simulator.hpp"

#include <cmath>
#include <cstdio>

namespace trustrepair {

namespace {

enum Stream : std::uint64_t {
  kComplexityStream = 1,
  kTrustStream = 2,
  kActionStream = 3,
  kOutcomeStream = 4,
  kMessageStream = 5,
};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void validate_env(const EnvConfig& env) {
  if (!(env.success_probability >= 0.0 && env.success_probability <= 1.0)) {
    throw ConfigError("success_probability must lie in [0, 1]");
  }
  if (env.n_trials < 1) throw ConfigError("n_trials must be at least 1");
  std::visit(overloaded{
                 [](const IidComplexity& iid) {
                   if (!(iid.p_high >= 0.0 && iid.p_high <= 1.0)) {
                     throw ConfigError("p_high_complexity must lie in [0, 1]");
                   }
                 },
                 [&](const std::vector<Complexity>& schedule) {
                   if (schedule.size() < static_cast<std::size_t>(env.n_trials)) {
                     throw ConfigError("complexity schedule is shorter than n_trials");
                   }
                 },
             },
             env.complexity);
}

Complexity draw_complexity(const EnvConfig& env, int trial_index, Rng& rng) {
  const double u = rng.uniform();
  return std::visit(overloaded{
                        [&](const IidComplexity& iid) {
                          return u < iid.p_high ? Complexity::High : Complexity::Low;
                        },
                        [&](const std::vector<Complexity>& schedule) {
                          return schedule.at(static_cast<std::size_t>(trial_index - 1));
                        },
                    },
                    env.complexity);
}

MessagePolicy parse_policy(std::string_view text) {
  if (text == "uniform") return UniformRandom{};
  if (text == "round-robin") return RoundRobin{};
  constexpr std::string_view kFixed = "fixed:";
  constexpr std::string_view kScripted = "scripted:";
  auto parse_strategy = [&](std::string_view token) {
    RobotMessage m;
    try {
      m = parse_message(token);
    } catch (const DomainError&) {
      throw ConfigError("unknown repair strategy '" + std::string(token) + "' in policy '" +
                        std::string(text) + "'");
    }
    if (m == RobotMessage::None) {
      throw ConfigError("policy '" + std::string(text) + "' names no repair strategy");
    }
    return m;
  };
  if (text.starts_with(kFixed)) return FixedStrategy{parse_strategy(text.substr(kFixed.size()))};
  if (text.starts_with(kScripted)) {
    Scripted script;
    std::string_view rest = text.substr(kScripted.size());
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      script.strategies.push_back(parse_strategy(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (script.strategies.empty()) throw ConfigError("scripted policy is empty");
    return script;
  }
  throw ConfigError("unknown policy '" + std::string(text) + "'");
}

std::string policy_name(const MessagePolicy& policy) {
  return std::visit(overloaded{
                        [](const FixedStrategy& f) {
                          return "fixed:" + std::string(to_string(f.strategy));
                        },
                        [](const UniformRandom&) { return std::string("uniform"); },
                        [](const RoundRobin&) { return std::string("round-robin"); },
                        [](const Scripted& s) {
                          std::string out = "scripted:";
                          for (std::size_t i = 0; i < s.strategies.size(); ++i) {
                            if (i) out += ',';
                            out += to_string(s.strategies[i]);
                          }
                          return out;
                        },
                    },
                    policy);
}

RobotMessage MessageSelector::next(Rng& rng) {
  const std::size_t n = issued_++;
  return std::visit(overloaded{
                        [](const FixedStrategy& f) { return f.strategy; },
                        [&](const UniformRandom&) {
                          return kRepairStrategies[rng.index(kRepairStrategies.size())];
                        },
                        [&](const RoundRobin&) {
                          return kRepairStrategies[n % kRepairStrategies.size()];
                        },
                        [&](const Scripted& s) {
                          if (n >= s.strategies.size()) {
                            throw PolicyExhaustedError("scripted policy ran out after " +
                                                       std::to_string(s.strategies.size()) +
                                                       " failures");
                          }
                          return s.strategies[n];
                        },
                    },
                    policy_);
}

SimulatedSession simulate_session(const iohmm::ModelParams& params, const EnvConfig& env,
                                  const MessagePolicy& policy, std::string participant_id,
                                  bool practice) {
  if (params.spec() != kTrustAlphabet) {
    throw iohmm::ModelError("simulation needs a model over the trust alphabet");
  }
  iohmm::validate_params(params);
  validate_env(env);

  Rng complexity_rng(derive_seed(env.seed, 0, kComplexityStream));
  Rng trust_rng(derive_seed(env.seed, 0, kTrustStream));
  Rng action_rng(derive_seed(env.seed, 0, kActionStream));
  Rng outcome_rng(derive_seed(env.seed, 0, kOutcomeStream));
  Rng message_rng(derive_seed(env.seed, 0, kMessageStream));
  MessageSelector selector(policy);

  SimulatedSession session;
  session.log.participant_id = std::move(participant_id);
  session.log.practice = practice;
  session.log.trials.reserve(static_cast<std::size_t>(env.n_trials));
  session.hidden_trust.reserve(static_cast<std::size_t>(env.n_trials));

  std::size_t state = 0;
  for (int t = 1; t <= env.n_trials; ++t) {
    TrialRecord trial;
    trial.trial_index = t;
    trial.complexity = draw_complexity(env, t, complexity_rng);

    const double u_state = trust_rng.uniform();
    state = t == 1 ? categorical_from_uniform(params.initial(), u_state)
                   : categorical_from_uniform(
                         params.transition_row(index_of(session.log.trials.back().event()), state),
                         u_state);
    session.hidden_trust.push_back(static_cast<TrustState>(state));

    const double u_action = action_rng.uniform();
    trial.human_action = static_cast<HumanAction>(categorical_from_uniform(
        params.emission_row(index_of(trial.complexity), state), u_action));

    // Drawn every trial so the outcome stream stays aligned across policies.
    const bool success = outcome_rng.uniform() < env.success_probability;
    if (trial.human_action == HumanAction::Manual) {
      trial.outcome = Outcome::NotApplicable;
      trial.robot_message = RobotMessage::None;
    } else if (success) {
      trial.outcome = Outcome::Success;
      trial.robot_message = RobotMessage::None;
    } else {
      trial.outcome = Outcome::Failure;
      trial.robot_message = selector.next(message_rng);
    }
    session.total_delivery_score += trial.delivery_score();
    session.log.trials.push_back(trial);
  }
  return session;
}

std::vector<SimulatedSession> simulate_cohort(const iohmm::ModelParams& params,
                                              const EnvConfig& env, const MessagePolicy& policy,
                                              std::size_t n_participants,
                                              const std::string& id_prefix, bool practice) {
  if (n_participants < 1) throw ConfigError("a cohort needs at least one participant");
  std::vector<SimulatedSession> cohort;
  cohort.reserve(n_participants);
  for (std::size_t i = 0; i < n_participants; ++i) {
    EnvConfig session_env = env;
    session_env.seed = derive_seed(env.seed, i);
    char id[32];
    std::snprintf(id, sizeof id, "-%03zu", i);
    cohort.push_back(simulate_session(params, session_env, policy, id_prefix + id, practice));
  }
  return cohort;
}

std::vector<PolicyEstimate> evaluate_policy(const iohmm::ModelParams& params,
                                            const EnvConfig& env,
                                            std::span<const MessagePolicy> policies,
                                            std::size_t n_mc) {
  if (n_mc < 1) throw ConfigError("n_mc must be at least 1");
  std::vector<PolicyEstimate> estimates;
  for (const auto& policy : policies) {
    // Welford's running mean and variance.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
      EnvConfig replicate = env;
      replicate.seed = derive_seed(env.seed, i);
      const double score = simulate_session(params, replicate, policy).total_delivery_score;
      const double delta = score - mean;
      mean += delta / static_cast<double>(i + 1);
      m2 += delta * (score - mean);
    }
    PolicyEstimate e;
    e.policy = policy_name(policy);
    e.mean = mean;
    e.n_mc = n_mc;
    e.std_error = n_mc > 1 ? std::sqrt(m2 / static_cast<double>(n_mc - 1) /
                                       static_cast<double>(n_mc))
                           : 0.0;
    estimates.push_back(std::move(e));
  }
  return estimates;
}

}  // namespace trustrepair
