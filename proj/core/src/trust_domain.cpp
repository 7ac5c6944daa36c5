#include "trustrepair/trust_domain.hpp"

namespace trustrepair {

bool is_valid_combination(HumanAction action, Outcome outcome,
                          RobotMessage message) noexcept {
  switch (action) {
    case HumanAction::Manual:
      return outcome == Outcome::NotApplicable && message == RobotMessage::None;
    case HumanAction::AutoDeploy:
      if (outcome == Outcome::Success) return message == RobotMessage::None;
      if (outcome == Outcome::Failure) return message != RobotMessage::None;
      return false;
  }
  return false;
}

TransitionEvent encode_event(HumanAction action, Outcome outcome,
                             RobotMessage message) {
  if (!is_valid_combination(action, outcome, message)) {
    throw DomainError("invalid trial combination (action " +
                      std::string(to_string(action)) + ", outcome " +
                      std::string(to_string(outcome)) + ", message " +
                      std::string(to_string(message)) + ")");
  }
  if (action == HumanAction::Manual) return TransitionEvent::Manual;
  if (outcome == Outcome::Success) return TransitionEvent::AutoSuccess;
  switch (message) {
    case RobotMessage::ShortExplanation: return TransitionEvent::AutoFailShortExpl;
    case RobotMessage::LongExplanation: return TransitionEvent::AutoFailLongExpl;
    case RobotMessage::ApologyPromise: return TransitionEvent::AutoFailApology;
    case RobotMessage::Denial: return TransitionEvent::AutoFailDenial;
    case RobotMessage::None: break;
  }
  throw DomainError("unreachable trial combination");
}

EventTriple decode_event(TransitionEvent event) noexcept {
  switch (event) {
    case TransitionEvent::AutoSuccess:
      return {HumanAction::AutoDeploy, Outcome::Success, RobotMessage::None};
    case TransitionEvent::AutoFailShortExpl:
      return {HumanAction::AutoDeploy, Outcome::Failure, RobotMessage::ShortExplanation};
    case TransitionEvent::AutoFailLongExpl:
      return {HumanAction::AutoDeploy, Outcome::Failure, RobotMessage::LongExplanation};
    case TransitionEvent::AutoFailApology:
      return {HumanAction::AutoDeploy, Outcome::Failure, RobotMessage::ApologyPromise};
    case TransitionEvent::AutoFailDenial:
      return {HumanAction::AutoDeploy, Outcome::Failure, RobotMessage::Denial};
    case TransitionEvent::Manual:
      break;
  }
  return {HumanAction::Manual, Outcome::NotApplicable, RobotMessage::None};
}

iohmm::ModelParams paper_reference_params() {
  iohmm::ModelParams p(kTrustAlphabet);
  p.initial()[kHighTrust] = kInitialHighTrust;
  p.initial()[kLowTrust] = kInitialLowTrust;

  auto set_emission = [&](Complexity c, std::size_t state, double p_auto) {
    auto row = p.emission_row(index_of(c), state);
    row[index_of(HumanAction::AutoDeploy)] = p_auto;
    row[index_of(HumanAction::Manual)] = 1.0 - p_auto;
  };
  set_emission(Complexity::Low, kHighTrust, kAutoGivenHighTrustLowComplexity);
  set_emission(Complexity::Low, kLowTrust, kAutoGivenLowTrustLowComplexity);
  set_emission(Complexity::High, kHighTrust, kAutoGivenHighTrustHighComplexity);
  set_emission(Complexity::High, kLowTrust, kAutoGivenLowTrustHighComplexity);

  for (TransitionEvent e : kAllEvents) {
    const TrustTransitionRates& rates = kReferenceTransitions[index_of(e)];
    auto high = p.transition_row(index_of(e), kHighTrust);
    high[kHighTrust] = rates.stay_high;
    high[kLowTrust] = 1.0 - rates.stay_high;
    auto low = p.transition_row(index_of(e), kLowTrust);
    low[kHighTrust] = rates.low_to_high;
    low[kLowTrust] = 1.0 - rates.low_to_high;
  }
  return p;
}

int delivery_reward(HumanAction action, Outcome outcome) {
  if (action == HumanAction::Manual) {
    if (outcome != Outcome::NotApplicable) {
      throw DomainError("manual delivery has no autonomous outcome");
    }
    return 30;
  }
  switch (outcome) {
    case Outcome::Success: return 50;
    case Outcome::Failure: return -100;
    case Outcome::NotApplicable: break;
  }
  throw DomainError("autonomous delivery needs a success or failure outcome");
}

int counting_reward(CountingStatus status) noexcept {
  switch (status) {
    case CountingStatus::Correct: return 20;
    case CountingStatus::Incorrect: return -20;
    case CountingStatus::NoAnswer: return -100;
  }
  return -100;
}

std::optional<int> TrialRecord::counting_score() const {
  if (!counting) return std::nullopt;
  return counting_reward(*counting);
}

void validate_session(const SessionLog& log) {
  if (log.trials.empty()) {
    throw DomainError("session '" + log.participant_id + "' has no trials");
  }
  int expected = 1;
  for (const TrialRecord& trial : log.trials) {
    const std::string where =
        "session '" + log.participant_id + "' trial " + std::to_string(trial.trial_index);
    if (trial.trial_index != expected) {
      throw DomainError(where + ": expected trial number " + std::to_string(expected));
    }
    ++expected;
    try {
      (void)trial.event();
    } catch (const DomainError& e) {
      throw DomainError(where + ": " + e.what());
    }
    if (trial.reported_trust && (*trial.reported_trust < 1 || *trial.reported_trust > 10)) {
      throw DomainError(where + ": reported trust " + std::to_string(*trial.reported_trust) +
                        " is outside 1..10");
    }
    if (trial.manual_abandoned && trial.human_action != HumanAction::Manual) {
      throw DomainError(where + ": only manual deliveries can be abandoned");
    }
  }
}

namespace {

iohmm::SequenceData encode_session(const SessionLog& log, bool keep_last_event) {
  validate_session(log);
  iohmm::SequenceData seq;
  const std::size_t T = log.trials.size();
  seq.outputs.reserve(T);
  seq.emission_inputs.reserve(T);
  seq.transition_inputs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const TrialRecord& trial = log.trials[t];
    seq.outputs.push_back(index_of(trial.human_action));
    seq.emission_inputs.push_back(index_of(trial.complexity));
    if (t + 1 < T || keep_last_event) {
      seq.transition_inputs.push_back(index_of(trial.event()));
    }
  }
  return seq;
}

}  // namespace

iohmm::SequenceData session_to_sequence(const SessionLog& log) {
  return encode_session(log, false);
}

iohmm::SequenceData session_to_filter_input(const SessionLog& log) {
  return encode_session(log, true);
}

std::vector<double> high_trust_trace(const iohmm::ModelParams& params, const SessionLog& log) {
  const auto beliefs = iohmm::filter_predictive(params, session_to_sequence(log));
  std::vector<double> trace;
  trace.reserve(beliefs.size());
  for (const auto& b : beliefs) trace.push_back(b[kHighTrust]);
  return trace;
}

iohmm::CanonicalStates canonicalize_trust_states(const iohmm::ModelParams& params) {
  return iohmm::canonicalize_states(
      params, {index_of(Complexity::Low), index_of(HumanAction::AutoDeploy)});
}

std::string_view to_string(Complexity c) noexcept {
  return c == Complexity::Low ? "L" : "H";
}

std::string_view to_string(HumanAction a) noexcept {
  return a == HumanAction::AutoDeploy ? "auto" : "manual";
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    case Outcome::NotApplicable: return "na";
  }
  return "na";
}

std::string_view to_string(RobotMessage m) noexcept {
  switch (m) {
    case RobotMessage::ShortExplanation: return "short";
    case RobotMessage::LongExplanation: return "long";
    case RobotMessage::ApologyPromise: return "apology";
    case RobotMessage::Denial: return "denial";
    case RobotMessage::None: return "none";
  }
  return "none";
}

std::string_view to_string(CountingStatus s) noexcept {
  switch (s) {
    case CountingStatus::Correct: return "correct";
    case CountingStatus::Incorrect: return "incorrect";
    case CountingStatus::NoAnswer: return "none";
  }
  return "none";
}

std::string_view to_string(TransitionEvent e) noexcept {
  switch (e) {
    case TransitionEvent::AutoSuccess: return "auto_success";
    case TransitionEvent::AutoFailShortExpl: return "auto_fail_short";
    case TransitionEvent::AutoFailLongExpl: return "auto_fail_long";
    case TransitionEvent::AutoFailApology: return "auto_fail_apology";
    case TransitionEvent::AutoFailDenial: return "auto_fail_denial";
    case TransitionEvent::Manual: return "manual";
  }
  return "manual";
}

std::string_view to_string(TrustState s) noexcept {
  return s == TrustState::High ? "H" : "L";
}

Complexity parse_complexity(std::string_view token) {
  if (token == "L") return Complexity::Low;
  if (token == "H") return Complexity::High;
  throw DomainError("unknown complexity '" + std::string(token) + "'");
}

HumanAction parse_action(std::string_view token) {
  if (token == "auto") return HumanAction::AutoDeploy;
  if (token == "manual") return HumanAction::Manual;
  throw DomainError("unknown action '" + std::string(token) + "'");
}

Outcome parse_outcome(std::string_view token) {
  if (token == "success") return Outcome::Success;
  if (token == "failure") return Outcome::Failure;
  if (token == "na") return Outcome::NotApplicable;
  throw DomainError("unknown outcome '" + std::string(token) + "'");
}

RobotMessage parse_message(std::string_view token) {
  if (token == "short") return RobotMessage::ShortExplanation;
  if (token == "long") return RobotMessage::LongExplanation;
  if (token == "apology") return RobotMessage::ApologyPromise;
  if (token == "denial") return RobotMessage::Denial;
  if (token == "none") return RobotMessage::None;
  throw DomainError("unknown robot message '" + std::string(token) + "'");
}

CountingStatus parse_counting(std::string_view token) {
  if (token == "correct") return CountingStatus::Correct;
  if (token == "incorrect") return CountingStatus::Incorrect;
  if (token == "none") return CountingStatus::NoAnswer;
  throw DomainError("unknown counting status '" + std::string(token) + "'");
}

}  // namespace trustrepair
