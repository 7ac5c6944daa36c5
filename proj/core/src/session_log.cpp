#include "trustrepair/session_log.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

namespace trustrepair {

using nlohmann::json;

LogParseError::LogParseError(std::string source, std::size_t line, const std::string& reason)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + reason),
      source_(std::move(source)),
      line_(line) {}

std::string format_trial_line(const std::string& participant_id, bool practice,
                              const TrialRecord& trial) {
  // ordered_json keeps the field order stable so output files are byte-identical.
  nlohmann::ordered_json j;
  j["participant_id"] = participant_id;
  j["trial"] = trial.trial_index;
  j["complexity"] = to_string(trial.complexity);
  j["action"] = to_string(trial.human_action);
  j["outcome"] = to_string(trial.outcome);
  j["message"] = to_string(trial.robot_message);
  j["reported_trust"] = trial.reported_trust ? json(*trial.reported_trust) : json(nullptr);
  j["counting"] = trial.counting ? json(to_string(*trial.counting)) : json(nullptr);
  j["practice"] = practice;
  j["delivery_score"] = trial.delivery_score();
  const auto counting_score = trial.counting_score();
  j["counting_score"] = counting_score ? json(*counting_score) : json(nullptr);
  if (trial.manual_abandoned) j["abandoned"] = true;
  return j.dump();
}

namespace {

const json& required(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DomainError(std::string("missing field '") + key + "'");
  return *it;
}

std::string required_string(const json& j, const char* key) {
  const json& v = required(j, key);
  if (!v.is_string()) throw DomainError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

ParsedTrialLine parse_trial_object(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DomainError("line is not a JSON object");

  ParsedTrialLine parsed;
  const json& id = required(j, "participant_id");
  if (id.is_string()) {
    parsed.participant_id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    parsed.participant_id = std::to_string(id.get<long long>());
  } else {
    throw DomainError("field 'participant_id' must be a string");
  }

  const json& trial = required(j, "trial");
  if (!trial.is_number_integer()) throw DomainError("field 'trial' must be an integer");
  TrialRecord& t = parsed.trial;
  t.trial_index = trial.get<int>();
  t.complexity = parse_complexity(required_string(j, "complexity"));
  t.human_action = parse_action(required_string(j, "action"));
  t.outcome = parse_outcome(required_string(j, "outcome"));
  t.robot_message = parse_message(required_string(j, "message"));

  if (auto it = j.find("reported_trust"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw DomainError("field 'reported_trust' must be an integer");
    t.reported_trust = it->get<int>();
    if (*t.reported_trust < 1 || *t.reported_trust > 10) {
      throw DomainError("reported_trust " + std::to_string(*t.reported_trust) +
                        " is outside 1..10");
    }
  }
  if (auto it = j.find("counting"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw DomainError("field 'counting' must be a string");
    t.counting = parse_counting(it->get<std::string>());
  }
  if (auto it = j.find("practice"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw DomainError("field 'practice' must be a boolean");
    parsed.practice = it->get<bool>();
  }
  if (auto it = j.find("abandoned"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw DomainError("field 'abandoned' must be a boolean");
    t.manual_abandoned = it->get<bool>();
  }

  (void)t.event();  // rejects impossible combinations
  if (auto it = j.find("delivery_score"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<int>() != t.delivery_score()) {
      throw DomainError("delivery_score disagrees with action and outcome");
    }
  }
  if (auto it = j.find("counting_score"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || t.counting_score() != it->get<int>()) {
      throw DomainError("counting_score disagrees with counting status");
    }
  }
  if (t.manual_abandoned && t.human_action != HumanAction::Manual) {
    throw DomainError("only manual deliveries can be abandoned");
  }
  return parsed;
}

}  // namespace

ParsedTrialLine parse_trial_line(const std::string& line) {
  try {
    return parse_trial_object(line);
  } catch (const json::exception& e) {
    throw DomainError(e.what());
  }
}

void write_session(std::ostream& out, const SessionLog& log) {
  for (const auto& trial : log.trials) {
    out << format_trial_line(log.participant_id, log.practice, trial) << '\n';
  }
}

void write_sessions(std::ostream& out, std::span<const SessionLog> logs) {
  for (const auto& log : logs) write_session(out, log);
}

std::vector<SessionLog> read_sessions(std::istream& in, const std::string& source) {
  std::vector<SessionLog> sessions;
  std::vector<std::size_t> first_line;
  std::map<std::pair<std::string, bool>, std::size_t> index;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) {
      continue;
    }
    ParsedTrialLine parsed;
    try {
      parsed = parse_trial_line(line);
    } catch (const DomainError& e) {
      throw LogParseError(source, line_no, e.what());
    }
    const auto key = std::make_pair(parsed.participant_id, parsed.practice);
    auto [it, inserted] = index.try_emplace(key, sessions.size());
    if (inserted) {
      sessions.push_back({parsed.participant_id, parsed.practice, {}});
      first_line.push_back(line_no);
    }
    sessions[it->second].trials.push_back(parsed.trial);
  }

  for (std::size_t i = 0; i < sessions.size(); ++i) {
    auto& trials = sessions[i].trials;
    std::stable_sort(trials.begin(), trials.end(),
                     [](const TrialRecord& a, const TrialRecord& b) {
                       return a.trial_index < b.trial_index;
                     });
    try {
      validate_session(sessions[i]);
    } catch (const DomainError& e) {
      throw LogParseError(source, first_line[i], e.what());
    }
  }
  return sessions;
}

std::vector<SessionLog> read_session_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open session log " + path.string());
  return read_sessions(in, path.string());
}

std::vector<SessionLog> read_session_files(std::span<const std::filesystem::path> paths) {
  std::vector<SessionLog> all;
  for (const auto& path : paths) {
    auto logs = read_session_file(path);
    std::move(logs.begin(), logs.end(), std::back_inserter(all));
  }
  return all;
}

void write_hidden_trust(std::ostream& out, const std::string& participant_id,
                        std::span<const TrustState> states) {
  for (std::size_t t = 0; t < states.size(); ++t) {
    nlohmann::ordered_json j;
    j["participant_id"] = participant_id;
    j["trial"] = t + 1;
    j["trust"] = to_string(states[t]);
    out << j.dump() << '\n';
  }
}

std::vector<HiddenTrustTrace> read_hidden_trust(std::istream& in, const std::string& source) {
  std::vector<HiddenTrustTrace> traces;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string id = required_string(j, "participant_id");
      const std::string trust = required_string(j, "trust");
      if (trust != "H" && trust != "L") throw DomainError("trust must be \"H\" or \"L\"");
      auto [it, inserted] = index.try_emplace(id, traces.size());
      if (inserted) traces.push_back({id, {}});
      auto& states = traces[it->second].states;
      if (required(j, "trial").get<std::size_t>() != states.size() + 1) {
        throw DomainError("hidden-trust trials must be consecutive from 1");
      }
      states.push_back(trust == "H" ? TrustState::High : TrustState::Low);
    } catch (const json::exception& e) {
      throw LogParseError(source, line_no, e.what());
    } catch (const DomainError& e) {
      throw LogParseError(source, line_no, e.what());
    }
  }
  return traces;
}

std::filesystem::path hidden_trust_path(const std::filesystem::path& log_path) {
  auto out = log_path;
  out.replace_filename(log_path.stem().string() + ".hidden.jsonl");
  return out;
}

}  // namespace trustrepair
