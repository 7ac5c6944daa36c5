#pragma once

// Trust-modulated human behavior model for robot-assisted delivery.
//
// Hidden state: human trust, high or low. Output: the human's choice to let
// the robot deliver autonomously or to deliver manually. The emission input
// is the delivery complexity of the current trial; the transition input is
// the event of the previous trial (its outcome and the robot's repair
// message, or a manual delivery).

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trustrepair/iohmm.hpp"

namespace trustrepair {

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TrustState { High = 0, Low = 1 };
enum class Complexity { Low = 0, High = 1 };
enum class HumanAction { AutoDeploy = 0, Manual = 1 };
enum class Outcome { Success, Failure, NotApplicable };
enum class RobotMessage { ShortExplanation, LongExplanation, ApologyPromise, Denial, None };
enum class CountingStatus { Correct, Incorrect, NoAnswer };

enum class TransitionEvent {
  AutoSuccess = 0,
  AutoFailShortExpl = 1,
  AutoFailLongExpl = 2,
  AutoFailApology = 3,
  AutoFailDenial = 4,
  Manual = 5,
};

inline constexpr std::size_t kHighTrust = static_cast<std::size_t>(TrustState::High);
inline constexpr std::size_t kLowTrust = static_cast<std::size_t>(TrustState::Low);

/// Alphabet of the trust model: 2 trust states, 6 events, 2 complexities,
/// 2 actions.
inline constexpr iohmm::AlphabetSpec kTrustAlphabet{2, 6, 2, 2};

inline constexpr std::array<TransitionEvent, 6> kAllEvents{
    TransitionEvent::AutoSuccess,     TransitionEvent::AutoFailShortExpl,
    TransitionEvent::AutoFailLongExpl, TransitionEvent::AutoFailApology,
    TransitionEvent::AutoFailDenial,  TransitionEvent::Manual};

/// The four repair strategies, in the order used by round-robin schedules.
inline constexpr std::array<RobotMessage, 4> kRepairStrategies{
    RobotMessage::ShortExplanation, RobotMessage::LongExplanation,
    RobotMessage::ApologyPromise, RobotMessage::Denial};

constexpr std::size_t index_of(Complexity c) noexcept { return static_cast<std::size_t>(c); }
constexpr std::size_t index_of(HumanAction a) noexcept { return static_cast<std::size_t>(a); }
constexpr std::size_t index_of(TransitionEvent e) noexcept { return static_cast<std::size_t>(e); }
constexpr std::size_t index_of(TrustState s) noexcept { return static_cast<std::size_t>(s); }

/// Throws DomainError for combinations that cannot occur in a trial.
TransitionEvent encode_event(HumanAction action, Outcome outcome, RobotMessage message);

struct EventTriple {
  HumanAction action;
  Outcome outcome;
  RobotMessage message;

  friend bool operator==(const EventTriple&, const EventTriple&) = default;
};

EventTriple decode_event(TransitionEvent event) noexcept;

/// Valid iff encode_event accepts it.
bool is_valid_combination(HumanAction action, Outcome outcome, RobotMessage message) noexcept;

// Reference parameters (state order high, low; output order auto, manual).
inline constexpr double kInitialHighTrust = 0.06;
inline constexpr double kInitialLowTrust = 0.94;
inline constexpr double kAutoGivenHighTrustLowComplexity = 1.00;
inline constexpr double kAutoGivenLowTrustLowComplexity = 0.51;
inline constexpr double kAutoGivenHighTrustHighComplexity = 0.91;
inline constexpr double kAutoGivenLowTrustHighComplexity = 0.46;

struct TrustTransitionRates {
  double stay_high;
  double low_to_high;
};

// The manual-delivery panel of the estimated model reads "stay high 0.86",
// while the accompanying discussion describes a 0.86 chance of dropping to
// low. The figure value is used; flip this constant to 0.14 for the other
// reading.
inline constexpr double kManualStayHigh = 0.86;

/// Indexed by TransitionEvent.
inline constexpr std::array<TrustTransitionRates, 6> kReferenceTransitions{{
    {1.00, 0.21},             // success
    {0.83, 0.00},             // short explanation
    {0.74, 0.10},             // long explanation
    {0.67, 0.04},             // apology and promise
    {0.88, 0.00},             // denial
    {kManualStayHigh, 0.00},  // manual delivery
}};

/// The estimated two-state model reported for the human-subject cohort.
iohmm::ModelParams paper_reference_params();

/// Delivery reward: +50 autonomous success, -100 autonomous failure,
/// +30 manual delivery.
int delivery_reward(HumanAction action, Outcome outcome);
int counting_reward(CountingStatus status) noexcept;

struct TrialRecord {
  int trial_index = 1;
  Complexity complexity = Complexity::Low;
  HumanAction human_action = HumanAction::AutoDeploy;
  Outcome outcome = Outcome::Success;
  RobotMessage robot_message = RobotMessage::None;
  std::optional<int> reported_trust;
  std::optional<CountingStatus> counting;
  /// Manual mini-task given up before completion (still scored +30).
  bool manual_abandoned = false;

  TransitionEvent event() const { return encode_event(human_action, outcome, robot_message); }
  int delivery_score() const { return delivery_reward(human_action, outcome); }
  std::optional<int> counting_score() const;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct SessionLog {
  std::string participant_id;
  bool practice = false;
  std::vector<TrialRecord> trials;

  friend bool operator==(const SessionLog&, const SessionLog&) = default;
};

/// Throws DomainError: empty log, trial numbering not 1, 2, 3, ..., invalid
/// trial combination or reported trust outside 1..10.
void validate_session(const SessionLog& log);

/// Strict IOHMM layout: T outputs, T complexities, T-1 events.
iohmm::SequenceData session_to_sequence(const SessionLog& log);

/// Like session_to_sequence but keeps the last trial's event, so filtering
/// yields a belief for the start of the trial after the log ends.
iohmm::SequenceData session_to_filter_input(const SessionLog& log);

/// Predictive P(high trust) at the start of each trial of the log.
std::vector<double> high_trust_trace(const iohmm::ModelParams& params, const SessionLog& log);

/// Canonical state labeling for the trust model: the state that deploys the
/// robot more often on low-complexity trials is the high-trust state.
iohmm::CanonicalStates canonicalize_trust_states(const iohmm::ModelParams& params);

std::string_view to_string(Complexity c) noexcept;
std::string_view to_string(HumanAction a) noexcept;
std::string_view to_string(Outcome o) noexcept;
std::string_view to_string(RobotMessage m) noexcept;
std::string_view to_string(CountingStatus s) noexcept;
std::string_view to_string(TransitionEvent e) noexcept;
std::string_view to_string(TrustState s) noexcept;

/// Parse the short tokens used in the session-log format ("L", "auto",
/// "failure", "apology", "correct", ...). Throw DomainError on unknown tokens.
Complexity parse_complexity(std::string_view token);
HumanAction parse_action(std::string_view token);
Outcome parse_outcome(std::string_view token);
RobotMessage parse_message(std::string_view token);
CountingStatus parse_counting(std::string_view token);

}  // namespace trustrepair
