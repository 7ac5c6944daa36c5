#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "trustrepair/iohmm.hpp"
#include "trustrepair/random.hpp"
#include "trustrepair/trust_domain.hpp"

namespace trustrepair {

/// Complexity drawn independently per trial.
struct IidComplexity {
  double p_high = 0.5;
};

/// Either i.i.d. draws or an explicit per-trial schedule.
using ComplexitySchedule = std::variant<IidComplexity, std::vector<Complexity>>;

struct EnvConfig {
  double success_probability = 0.75;
  ComplexitySchedule complexity = IidComplexity{};
  int n_trials = 60;
  std::uint64_t seed = 0;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void validate_env(const EnvConfig& env);

/// Complexity of trial `trial_index` (1-based). Consumes exactly one uniform
/// from `rng` either way, so schedules and draws stay aligned across runs.
Complexity draw_complexity(const EnvConfig& env, int trial_index, Rng& rng);

// Repair-message assignment on failures.
struct FixedStrategy {
  RobotMessage strategy = RobotMessage::LongExplanation;
};
struct UniformRandom {};
/// Cycles short, long, apology, denial.
struct RoundRobin {};
/// Consumed in order; running out is an error.
struct Scripted {
  std::vector<RobotMessage> strategies;
};

using MessagePolicy = std::variant<FixedStrategy, UniformRandom, RoundRobin, Scripted>;

class PolicyExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Accepts "fixed:<short|long|apology|denial>", "uniform", "round-robin",
/// "scripted:<m1>,<m2>,...".
MessagePolicy parse_policy(std::string_view text);
std::string policy_name(const MessagePolicy& policy);

/// Per-session state of a policy (round-robin position, script cursor).
class MessageSelector {
 public:
  explicit MessageSelector(MessagePolicy policy) : policy_(std::move(policy)) {}

  RobotMessage next(Rng& rng);
  std::size_t issued() const noexcept { return issued_; }

 private:
  MessagePolicy policy_;
  std::size_t issued_ = 0;
};

struct SimulatedSession {
  SessionLog log;
  std::vector<TrustState> hidden_trust;
  int total_delivery_score = 0;
};

/// One synthetic participant. Draws use independent streams derived from
/// env.seed (complexity, trust, action, outcome, message), so two policies
/// run with the same seed see the same complexities and outcome draws.
SimulatedSession simulate_session(const iohmm::ModelParams& params, const EnvConfig& env,
                                  const MessagePolicy& policy,
                                  std::string participant_id = "sim-000",
                                  bool practice = false);

/// Session i uses seed derive_seed(env.seed, i) and id "<prefix>-NNN".
std::vector<SimulatedSession> simulate_cohort(const iohmm::ModelParams& params,
                                              const EnvConfig& env, const MessagePolicy& policy,
                                              std::size_t n_participants,
                                              const std::string& id_prefix = "sim",
                                              bool practice = false);

struct PolicyEstimate {
  std::string policy;
  double mean = 0.0;
  /// Sample standard deviation over sqrt(n); 0 when n_mc = 1.
  double std_error = 0.0;
  std::size_t n_mc = 0;
};

/// Monte Carlo mean total delivery score per policy. Replicate i uses the
/// same derived seed for every policy (common random numbers).
std::vector<PolicyEstimate> evaluate_policy(const iohmm::ModelParams& params,
                                            const EnvConfig& env,
                                            std::span<const MessagePolicy> policies,
                                            std::size_t n_mc);

}  // namespace trustrepair
