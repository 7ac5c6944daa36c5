#include "trustrepair/experiment_service.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include "service_json.hpp"
#include "trustrepair/random.hpp"
#include "trustrepair/session_log.hpp"

namespace trustrepair::service {

using nlohmann::json;
using nlohmann::ordered_json;

const std::array<std::string_view, 65> kRobotNames{
    "Atlas",  "Beacon", "Bolt",    "Cedar",   "Comet",  "Cobalt", "Dash",   "Delta",  "Echo",
    "Ember",  "Falcon", "Flint",   "Gizmo",   "Glide",  "Harbor", "Helix",  "Indigo", "Iris",
    "Jasper", "Jet",    "Juno",    "Kepler",  "Kite",   "Lumen",  "Lynx",   "Maple",  "Mercury",
    "Nimbus", "Nova",   "Onyx",    "Orbit",   "Pixel",  "Pulse",  "Quartz", "Quill",  "Radar",
    "Rover",  "Sable",  "Scout",   "Sprocket", "Talon", "Tango",  "Titan",  "Ultra",  "Umber",
    "Vector", "Vega",   "Volt",    "Widget",  "Willow", "Xenon",  "Yarrow", "Yukon",  "Zephyr",
    "Zinc",   "Aster",  "Blaze",   "Cinder",  "Dynamo", "Ferro",  "Gadget", "Halo",   "Ion",
    "Jolt",   "Koda",
};

std::string_view message_text(RobotMessage strategy, std::size_t variant) {
  static constexpr std::array<std::array<std::string_view, 2>, 4> kTexts{{
      {"I mixed up the room numbers, causing the wrong delivery.",
       "I had a power problem and had to recharge sooner than planned."},
      {"The mistake happened because there was a smudge on my cameras, which confused my "
       "system. A staff member has cleaned the lens, so this won't happen again.",
       "The delivery issue happened because of a new power-saving mode that didn't work as "
       "planned. It misjudged the power needed, causing me to shut down early. We're fixing it "
       "so I can complete all deliveries before recharging."},
      {"I'm sorry for the mistake. I'll make sure it doesn't happen again.",
       "Sorry, I didn't finish the delivery. I'll make sure it doesn't happen again."},
      {"I didn't make a mistake. The problem was with the room info given to me.",
       "I didn't make a mistake. No one was there to get the delivery."},
  }};
  switch (strategy) {
    case RobotMessage::ShortExplanation: return kTexts[0][variant % 2];
    case RobotMessage::LongExplanation: return kTexts[1][variant % 2];
    case RobotMessage::ApologyPromise: return kTexts[2][variant % 2];
    case RobotMessage::Denial: return kTexts[3][variant % 2];
    case RobotMessage::None: break;
  }
  return {};
}

std::string_view to_string(Phase phase) noexcept {
  switch (phase) {
    case Phase::AwaitingAction: return "awaiting_action";
    case Phase::ManualDelivery: return "manual_delivery";
    case Phase::Counting: return "counting";
    case Phase::AwaitingTrustReport: return "awaiting_trust_report";
    case Phase::Finished: return "finished";
  }
  return "finished";
}

namespace detail {

ordered_json env_to_json(const EnvConfig& env) {
  ordered_json j;
  j["n_trials"] = env.n_trials;
  j["success_probability"] = env.success_probability;
  if (const auto* iid = std::get_if<IidComplexity>(&env.complexity)) {
    j["p_high_complexity"] = iid->p_high;
  } else {
    std::vector<std::string> schedule;
    for (Complexity c : std::get<std::vector<Complexity>>(env.complexity)) {
      schedule.emplace_back(trustrepair::to_string(c));
    }
    j["complexity_schedule"] = schedule;
  }
  j["seed"] = env.seed;
  return j;
}

EnvConfig env_from_json(const json& j, EnvConfig base) {
  try {
    if (auto it = j.find("n_trials"); it != j.end()) base.n_trials = it->get<int>();
    if (auto it = j.find("success_probability"); it != j.end()) {
      base.success_probability = it->get<double>();
    }
    if (auto it = j.find("p_high_complexity"); it != j.end()) {
      base.complexity = IidComplexity{it->get<double>()};
    }
    if (auto it = j.find("complexity_schedule"); it != j.end()) {
      std::vector<Complexity> schedule;
      for (const auto& c : *it) schedule.push_back(parse_complexity(c.get<std::string>()));
      base.complexity = std::move(schedule);
    }
    if (auto it = j.find("seed"); it != j.end()) base.seed = it->get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid session configuration: ") + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
  return base;
}

ordered_json request_to_json(const SessionRequest& request) {
  ordered_json j = env_to_json(request.env);
  j["policy"] = policy_name(request.policy);
  j["researcher_mode"] = request.researcher_mode;
  j["practice"] = request.practice;
  j["participant_id"] = request.participant_id;
  return j;
}

SessionRequest request_from_json(const json& j, SessionRequest base) {
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  base.env = env_from_json(j, base.env);
  try {
    if (auto it = j.find("policy"); it != j.end()) {
      base.policy = parse_policy(it->get<std::string>());
    }
    if (auto it = j.find("researcher_mode"); it != j.end()) base.researcher_mode = it->get<bool>();
    if (auto it = j.find("practice"); it != j.end()) base.practice = it->get<bool>();
    if (auto it = j.find("participant_id"); it != j.end()) {
      base.participant_id = it->get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid session configuration: ") + e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(e.what());
  }
  return base;
}

}  // namespace detail

namespace {

enum Stream : std::uint64_t {
  kComplexityStream = 1,
  kOutcomeStream = 4,
  kMessageStream = 5,
  kNameStream = 6,
};

std::size_t strategy_slot(RobotMessage m) {
  return static_cast<std::size_t>(m);
}

}  // namespace

struct SessionManager::LiveSession {
  LiveSession(std::string session_id, SessionRequest req)
      : id(std::move(session_id)),
        request(std::move(req)),
        complexity_rng(derive_seed(request.env.seed, 0, kComplexityStream)),
        outcome_rng(derive_seed(request.env.seed, 0, kOutcomeStream)),
        message_rng(derive_seed(request.env.seed, 0, kMessageStream)),
        selector(request.policy) {}

  std::string id;
  SessionRequest request;
  mutable std::mutex mutex;

  Rng complexity_rng;
  Rng outcome_rng;
  Rng message_rng;
  MessageSelector selector;
  std::vector<std::string_view> names;
  std::array<std::size_t, 4> variant_counts{};

  Phase phase = Phase::AwaitingAction;
  int trial = 1;
  Complexity complexity = Complexity::Low;
  std::optional<HumanAction> action;
  std::optional<Outcome> outcome;
  RobotMessage message = RobotMessage::None;
  std::string text;
  bool abandoned = false;
  std::optional<CountingStatus> counting;

  int delivery_score = 0;
  int counting_score = 0;
  std::vector<TrialRecord> completed;

  iohmm::Belief belief;
  std::vector<double> trace;
  bool impossible = false;

  void start_trial() {
    complexity = draw_complexity(request.env, trial, complexity_rng);
    phase = Phase::AwaitingAction;
    action.reset();
    outcome.reset();
    message = RobotMessage::None;
    text.clear();
    abandoned = false;
    counting.reset();
  }

  void require(Phase expected, const char* operation) const {
    if (phase != expected) {
      throw PhaseError(std::string(operation) + " is not allowed in phase " +
                       std::string(to_string(phase)));
    }
  }

  /// Condition on this trial's action, then move through its event.
  void update_belief(const iohmm::ModelParams& model, TransitionEvent event) {
    if (impossible) return;
    try {
      const iohmm::Belief post = iohmm::condition_on_output(
          model, belief, index_of(complexity), index_of(*action),
          static_cast<std::size_t>(trial - 1));
      belief = iohmm::propagate(model, post, index_of(event));
      trace.push_back(belief[kHighTrust]);
    } catch (const iohmm::ImpossibleSequenceError&) {
      impossible = true;
    }
  }

  ActionResult apply_action(const iohmm::ModelParams& model, HumanAction a) {
    require(Phase::AwaitingAction, "submitting an action");
    action = a;
    ActionResult result;
    // The outcome stream advances on every trial, matching the simulator.
    const bool success = outcome_rng.uniform() < request.env.success_probability;
    if (a == HumanAction::Manual) {
      outcome = Outcome::NotApplicable;
      phase = Phase::ManualDelivery;
      result.outcome = Outcome::NotApplicable;
      result.phase = phase;
      update_belief(model, TransitionEvent::Manual);
      return result;
    }
    if (success) {
      outcome = Outcome::Success;
    } else {
      outcome = Outcome::Failure;
      message = selector.next(message_rng);
      text = std::string(message_text(message, variant_counts[strategy_slot(message)]++));
    }
    const int delta = delivery_reward(a, *outcome);
    delivery_score += delta;
    phase = Phase::Counting;
    update_belief(model, encode_event(a, *outcome, message));
    result.outcome = *outcome;
    result.message = message;
    result.message_text = text;
    result.delivery_score_delta = delta;
    result.phase = phase;
    return result;
  }

  int apply_manual(bool completed_task) {
    require(Phase::ManualDelivery, "reporting the manual delivery");
    abandoned = !completed_task;
    const int delta = delivery_reward(HumanAction::Manual, Outcome::NotApplicable);
    delivery_score += delta;
    phase = Phase::Counting;
    return delta;
  }

  int apply_count(int answer, int expected, bool timed_out) {
    require(Phase::Counting, "submitting a count");
    counting = timed_out ? CountingStatus::NoAnswer
               : answer == expected ? CountingStatus::Correct
                                    : CountingStatus::Incorrect;
    const int delta = counting_reward(*counting);
    counting_score += delta;
    phase = Phase::AwaitingTrustReport;
    return delta;
  }

  Phase apply_trust(int value) {
    if (value < 1 || value > 10) {
      throw ValidationError("trust report must be an integer from 1 to 10");
    }
    require(Phase::AwaitingTrustReport, "submitting a trust report");
    TrialRecord record;
    record.trial_index = trial;
    record.complexity = complexity;
    record.human_action = *action;
    record.outcome = *outcome;
    record.robot_message = message;
    record.reported_trust = value;
    record.counting = counting;
    record.manual_abandoned = abandoned;
    completed.push_back(record);
    if (trial >= request.env.n_trials) {
      phase = Phase::Finished;
    } else {
      ++trial;
      start_trial();
    }
    return phase;
  }

  TrialView view(double time_limit) const {
    TrialView v;
    v.session_id = id;
    v.trial = trial;
    v.n_trials = request.env.n_trials;
    v.complexity = complexity;
    v.robot_name = std::string(names[static_cast<std::size_t>(trial - 1)]);
    v.phase = phase;
    v.practice = request.practice;
    v.researcher_mode = request.researcher_mode;
    v.delivery_score = delivery_score;
    v.counting_score = counting_score;
    v.action = action;
    v.outcome = outcome;
    if (outcome && *outcome == Outcome::Failure) v.message = message;
    v.message_text = text;
    v.counting_time_limit_s = time_limit;
    return v;
  }

  SessionLog log() const {
    return SessionLog{request.participant_id, request.practice, completed};
  }
};

SessionManager::SessionManager(ServiceConfig config) : config_(std::move(config)) {
  iohmm::validate_params(config_.model);
  if (config_.model.spec() != kTrustAlphabet) {
    throw ValidationError("the service needs a model over the trust alphabet");
  }
  if (!config_.data_dir.empty()) std::filesystem::create_directories(config_.data_dir);
}

SessionManager::~SessionManager() = default;

SessionRequest SessionManager::default_request() const {
  SessionRequest request;
  request.env = config_.default_env;
  request.policy = config_.default_policy;
  return request;
}

std::shared_ptr<SessionManager::LiveSession> SessionManager::make_session(
    const SessionRequest& request, const std::string& session_id, std::uint64_t seed) {
  SessionRequest resolved = request;
  resolved.env.seed = seed;
  try {
    validate_env(resolved.env);
  } catch (const ConfigError& e) {
    throw ValidationError(e.what());
  }
  if (resolved.env.n_trials > static_cast<int>(kRobotNames.size())) {
    throw ValidationError("n_trials may not exceed " + std::to_string(kRobotNames.size()) +
                          " (one robot name per trial)");
  }
  if (resolved.participant_id.empty()) resolved.participant_id = session_id;

  auto session = std::make_shared<LiveSession>(session_id, std::move(resolved));
  session->names.assign(kRobotNames.begin(), kRobotNames.end());
  Rng name_rng(derive_seed(seed, 0, kNameStream));
  for (std::size_t i = session->names.size() - 1; i > 0; --i) {
    std::swap(session->names[i], session->names[name_rng.index(i + 1)]);
  }
  session->belief.assign(config_.model.initial().begin(), config_.model.initial().end());
  session->trace.push_back(session->belief[kHighTrust]);
  session->start_trial();
  return session;
}

std::string SessionManager::create_session(const SessionRequest& request) {
  std::random_device rd;
  for (;;) {
    const std::uint64_t r = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    char id[17];
    std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(r));
    {
      std::shared_lock lock(registry_mutex_);
      if (sessions_.count(id)) continue;
    }
    try {
      return create_session(request, id);
    } catch (const ValidationError& e) {
      if (std::string_view(e.what()).find("already exists") == std::string_view::npos) throw;
    }
  }
}

std::string SessionManager::create_session(const SessionRequest& request,
                                           const std::string& session_id) {
  if (session_id.empty() ||
      !std::all_of(session_id.begin(), session_id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_';
      })) {
    throw ValidationError("session ids may only contain letters, digits, '-' and '_'");
  }
  auto session = make_session(request, session_id, request.env.seed);
  {
    std::unique_lock lock(registry_mutex_);
    if (!sessions_.emplace(session_id, session).second) {
      throw ValidationError("session '" + session_id + "' already exists");
    }
  }
  ordered_json line = detail::request_to_json(session->request);
  line = ordered_json{{"type", "create"}, {"session_id", session_id}, {"request", line}};
  std::lock_guard guard(session->mutex);
  append_journal(*session, line.dump());
  return session_id;
}

std::shared_ptr<SessionManager::LiveSession> SessionManager::find(
    const std::string& session_id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + session_id + "'");
  return it->second;
}

std::vector<std::string> SessionManager::session_ids() const {
  std::shared_lock lock(registry_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

void SessionManager::append_journal(const LiveSession& session, const std::string& line) const {
  if (config_.data_dir.empty()) return;
  std::ofstream out(config_.data_dir / (session.id + ".journal"), std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot write journal for session '" + session.id + "'");
}

void SessionManager::append_trial_line(const LiveSession& session) const {
  if (config_.data_dir.empty() || session.completed.empty()) return;
  std::ofstream out(config_.data_dir / (session.id + ".jsonl"), std::ios::app);
  out << format_trial_line(session.request.participant_id, session.request.practice,
                           session.completed.back())
      << '\n';
  if (!out) throw std::runtime_error("cannot write log for session '" + session.id + "'");
}

TrialView SessionManager::trial_state(const std::string& session_id) const {
  auto session = find(session_id);
  std::lock_guard guard(session->mutex);
  return session->view(config_.counting_time_limit_s);
}

ActionResult SessionManager::submit_action(const std::string& session_id, HumanAction action) {
  auto session = find(session_id);
  std::lock_guard guard(session->mutex);
  ActionResult result = session->apply_action(config_.model, action);
  append_journal(*session, ordered_json{{"type", "action"},
                                        {"action", trustrepair::to_string(action)}}
                               .dump());
  return result;
}

int SessionManager::submit_manual_result(const std::string& session_id, bool completed) {
  auto session = find(session_id);
  std::lock_guard guard(session->mutex);
  const int delta = session->apply_manual(completed);
  append_journal(*session, ordered_json{{"type", "manual"}, {"completed", completed}}.dump());
  return delta;
}

int SessionManager::submit_count(const std::string& session_id, int answer, int expected,
                                 bool timed_out) {
  auto session = find(session_id);
  std::lock_guard guard(session->mutex);
  const int delta = session->apply_count(answer, expected, timed_out);
  append_journal(*session, ordered_json{{"type", "count"},
                                        {"answer", answer},
                                        {"expected", expected},
                                        {"timed_out", timed_out}}
                               .dump());
  return delta;
}

Phase SessionManager::submit_trust_report(const std::string& session_id, int value) {
  auto session = find(session_id);
  std::lock_guard guard(session->mutex);
  const Phase phase = session->apply_trust(value);
  append_journal(*session, ordered_json{{"type", "trust"}, {"value", value}}.dump());
  append_trial_line(*session);
  return phase;
}

TrustEstimate SessionManager::trust_estimate(const std::string& session_id) const {
  auto session = find(session_id);
  std::lock_guard guard(session->mutex);
  if (!session->request.researcher_mode) {
    throw ForbiddenError("trust estimates are only available in researcher mode");
  }
  return TrustEstimate{session->trace.back(), session->trace, session->impossible};
}

SessionLog SessionManager::export_log(const std::string& session_id) const {
  auto session = find(session_id);
  std::lock_guard guard(session->mutex);
  return session->log();
}

std::size_t SessionManager::recover() {
  if (config_.data_dir.empty()) return 0;
  std::size_t loaded = 0;
  for (const auto& entry : std::filesystem::directory_iterator(config_.data_dir)) {
    if (entry.path().extension() != ".journal") continue;
    std::ifstream in(entry.path());
    std::string line;
    std::shared_ptr<LiveSession> session;
    std::streamoff good_end = 0;
    std::optional<std::streamoff> torn_at;
    while (std::getline(in, line)) {
      // A final line without its newline is a torn write.
      if (in.eof()) {
        torn_at = good_end;
        break;
      }
      if (line.empty()) {
        good_end = in.tellg();
        continue;
      }
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error&) {
        torn_at = good_end;
        break;
      }
      good_end = in.tellg();
      const std::string type = j.value("type", "");
      if (type == "create") {
        const std::string id = j.at("session_id").get<std::string>();
        {
          std::shared_lock lock(registry_mutex_);
          if (sessions_.count(id)) break;
        }
        SessionRequest request = detail::request_from_json(j.at("request"), default_request());
        session = make_session(request, id, request.env.seed);
        continue;
      }
      if (!session) break;
      if (type == "action") {
        session->apply_action(config_.model, parse_action(j.at("action").get<std::string>()));
      } else if (type == "manual") {
        session->apply_manual(j.at("completed").get<bool>());
      } else if (type == "count") {
        session->apply_count(j.at("answer").get<int>(), j.at("expected").get<int>(),
                             j.at("timed_out").get<bool>());
      } else if (type == "trust") {
        session->apply_trust(j.at("value").get<int>());
      }
    }
    in.close();
    if (torn_at) std::filesystem::resize_file(entry.path(), static_cast<std::uintmax_t>(*torn_at));
    if (!session) continue;
    {
      std::ofstream out(config_.data_dir / (session->id + ".jsonl"), std::ios::trunc);
      write_session(out, session->log());
    }
    std::unique_lock lock(registry_mutex_);
    if (sessions_.emplace(session->id, session).second) ++loaded;
  }
  return loaded;
}

}  // namespace trustrepair::service
