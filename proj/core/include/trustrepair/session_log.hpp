#pragma once

// Canonical session-log format: one JSON object per line, one line per trial.
//
//   {"participant_id": "p01", "trial": 3, "complexity": "L", "action": "auto",
//    "outcome": "failure", "message": "denial", "reported_trust": 6,
//    "counting": "correct"}
//
// reported_trust and counting may be null. Writers add "practice",
// "delivery_score" and "counting_score", plus "abandoned" on abandoned manual
// deliveries; readers accept their absence and ignore unknown fields.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trustrepair/trust_domain.hpp"

namespace trustrepair {

class LogParseError : public std::runtime_error {
 public:
  LogParseError(std::string source, std::size_t line, const std::string& reason);
  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

std::string format_trial_line(const std::string& participant_id, bool practice,
                              const TrialRecord& trial);

struct ParsedTrialLine {
  std::string participant_id;
  bool practice = false;
  TrialRecord trial;
};

/// Throws DomainError (or nlohmann parse errors wrapped as DomainError) on a
/// malformed line.
ParsedTrialLine parse_trial_line(const std::string& line);

void write_session(std::ostream& out, const SessionLog& log);
void write_sessions(std::ostream& out, std::span<const SessionLog> logs);

/// Groups lines by (participant_id, practice) in order of first appearance,
/// orders trials by trial number and validates each session. Blank lines are
/// skipped. Errors carry `source` and the 1-based line number.
std::vector<SessionLog> read_sessions(std::istream& in, const std::string& source);
std::vector<SessionLog> read_session_file(const std::filesystem::path& path);
std::vector<SessionLog> read_session_files(std::span<const std::filesystem::path> paths);

/// Hidden-trust sidecar: {"participant_id", "trial", "trust": "H"|"L"} lines.
void write_hidden_trust(std::ostream& out, const std::string& participant_id,
                        std::span<const TrustState> states);

struct HiddenTrustTrace {
  std::string participant_id;
  std::vector<TrustState> states;
};

std::vector<HiddenTrustTrace> read_hidden_trust(std::istream& in, const std::string& source);

/// "<stem>.hidden.jsonl" next to the log file.
std::filesystem::path hidden_trust_path(const std::filesystem::path& log_path);

}  // namespace trustrepair
