#pragma once

// Live experiment sessions: each trial is a delivery choice, an optional
// manual mini-task, a counting question and a trust report. The predictive
// trust belief is updated online with the same arithmetic as the offline
// filter.
//
// Persistence is an append-only journal per session (<data_dir>/<id>.journal)
// holding the creation request and every accepted operation. Because all
// randomness comes from the per-session seed, replaying the journal rebuilds
// the session exactly. Completed trials are also appended in the canonical
// session-log format to <data_dir>/<id>.jsonl.

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trustrepair/iohmm.hpp"
#include "trustrepair/simulator.hpp"
#include "trustrepair/trust_domain.hpp"

namespace trustrepair::service {

enum class Phase { AwaitingAction, ManualDelivery, Counting, AwaitingTrustReport, Finished };

std::string_view to_string(Phase phase) noexcept;

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class PhaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class ForbiddenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Robot display names; every trial of a session gets a different one.
extern const std::array<std::string_view, 65> kRobotNames;

/// Two wordings per repair strategy; occurrences alternate between them.
std::string_view message_text(RobotMessage strategy, std::size_t variant);

struct ServiceConfig {
  /// Empty disables persistence.
  std::filesystem::path data_dir;
  iohmm::ModelParams model = paper_reference_params();
  EnvConfig default_env;
  MessagePolicy default_policy = UniformRandom{};
  double counting_time_limit_s = 15.0;
};

struct SessionRequest {
  EnvConfig env;
  MessagePolicy policy = UniformRandom{};
  bool researcher_mode = false;
  bool practice = false;
  /// Defaults to the session id.
  std::string participant_id;
};

struct TrialView {
  std::string session_id;
  int trial = 0;
  int n_trials = 0;
  Complexity complexity = Complexity::Low;
  std::string robot_name;
  Phase phase = Phase::AwaitingAction;
  bool practice = false;
  bool researcher_mode = false;
  int delivery_score = 0;
  int counting_score = 0;
  /// Set once the delivery of the current trial is resolved.
  std::optional<HumanAction> action;
  std::optional<Outcome> outcome;
  std::optional<RobotMessage> message;
  std::string message_text;
  double counting_time_limit_s = 15.0;
};

struct ActionResult {
  Outcome outcome = Outcome::NotApplicable;
  RobotMessage message = RobotMessage::None;
  std::string message_text;
  /// Zero for manual deliveries until the mini-task is reported.
  int delivery_score_delta = 0;
  Phase phase = Phase::Counting;
};

struct TrustEstimate {
  /// P(high trust) at the start of the next unresolved trial.
  double p_high = 0.0;
  /// Predictive P(high trust) at the start of trial 1, 2, ...; one entry per
  /// resolved delivery plus the current value.
  std::vector<double> trace;
  /// The model assigns zero probability to an observed action; updates stopped.
  bool impossible = false;
};

class SessionManager {
 public:
  explicit SessionManager(ServiceConfig config);
  ~SessionManager();

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  const ServiceConfig& config() const noexcept { return config_; }

  /// Fills env/policy defaults from the service configuration.
  SessionRequest default_request() const;

  std::string create_session(const SessionRequest& request);
  /// As create_session but with a caller-chosen id (used by tests and replay).
  std::string create_session(const SessionRequest& request, const std::string& session_id);

  TrialView trial_state(const std::string& session_id) const;
  ActionResult submit_action(const std::string& session_id, HumanAction action);
  /// Returns the delivery score delta (+30).
  int submit_manual_result(const std::string& session_id, bool completed);
  /// Returns the counting score delta.
  int submit_count(const std::string& session_id, int answer, int expected, bool timed_out);
  /// Returns the phase after the report (AwaitingAction or Finished).
  Phase submit_trust_report(const std::string& session_id, int value);

  /// Researcher-mode sessions only; throws ForbiddenError otherwise.
  TrustEstimate trust_estimate(const std::string& session_id) const;

  /// Completed trials in the canonical format.
  SessionLog export_log(const std::string& session_id) const;

  /// Replays every journal in data_dir. Returns the number of sessions loaded.
  std::size_t recover();

  std::vector<std::string> session_ids() const;

 private:
  struct LiveSession;

  std::shared_ptr<LiveSession> find(const std::string& session_id) const;
  std::shared_ptr<LiveSession> make_session(const SessionRequest& request,
                                            const std::string& session_id, std::uint64_t seed);
  void append_journal(const LiveSession& session, const std::string& line) const;
  void append_trial_line(const LiveSession& session) const;

  ServiceConfig config_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
};

}  // namespace trustrepair::service
