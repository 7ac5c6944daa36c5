#pragma once

// HTTP front end for SessionManager.
//
//   POST /sessions                   -> {"session_id"}
//   GET  /sessions/{id}/trial        -> trial presentation
//   POST /sessions/{id}/action       {"action": "auto"|"manual"}
//   POST /sessions/{id}/manual       {"completed": bool}
//   POST /sessions/{id}/count        {"answer": int, "expected": int, "timed_out": bool}
//   POST /sessions/{id}/trust        {"value": 1..10}
//   GET  /sessions/{id}/estimate     researcher sessions only
//   GET  /sessions/{id}/log          canonical session log (JSON lines)
//
// Errors: 400 malformed body, 403 estimate on a participant session,
// 404 unknown session, 409 wrong phase, 422 validation.

#include <filesystem>
#include <memory>
#include <string>

#include "trustrepair/experiment_service.hpp"

namespace trustrepair::service {

class HttpService {
 public:
  /// `static_dir`, when non-empty, is served at "/" (for the browser client).
  explicit HttpService(SessionManager& sessions, std::filesystem::path static_dir = {});
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it (or -1).
  int bind_to_any_port(const std::string& host);
  /// Serves on the port from bind_to_any_port(); blocks until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace trustrepair::service
