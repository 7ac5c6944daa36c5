#include "trustrepair/http_service.hpp"

#include <httplib.h>

#include <json.hpp>
#include <random>
#include <sstream>

#include "service_json.hpp"
#include "trustrepair/session_log.hpp"

namespace trustrepair::service {

using nlohmann::json;
using nlohmann::ordered_json;

struct HttpService::Impl {
  SessionManager& sessions;
  httplib::Server server;

  explicit Impl(SessionManager& s) : sessions(s) {}
};

namespace {

void send_json(httplib::Response& res, const ordered_json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, ordered_json{{"error", message}}, status);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw std::domain_error(std::string("malformed JSON body: ") + e.what());
  }
}

template <class T>
T field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end()) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

/// Runs `handler`, mapping domain errors to status codes.
template <class Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const PhaseError& e) {
      send_error(res, 409, e.what());
    } catch (const ForbiddenError& e) {
      send_error(res, 403, e.what());
    } catch (const ValidationError& e) {
      send_error(res, 422, e.what());
    } catch (const DomainError& e) {
      send_error(res, 422, e.what());
    } catch (const ConfigError& e) {
      send_error(res, 422, e.what());
    } catch (const std::domain_error& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

ordered_json view_json(const TrialView& v) {
  ordered_json j;
  j["session_id"] = v.session_id;
  j["trial"] = v.trial;
  j["n_trials"] = v.n_trials;
  j["complexity"] = trustrepair::to_string(v.complexity);
  j["robot_name"] = v.robot_name;
  j["phase"] = to_string(v.phase);
  j["practice"] = v.practice;
  j["researcher_mode"] = v.researcher_mode;
  j["delivery_score"] = v.delivery_score;
  j["counting_score"] = v.counting_score;
  j["action"] = v.action ? json(trustrepair::to_string(*v.action)) : json(nullptr);
  j["outcome"] = v.outcome ? json(trustrepair::to_string(*v.outcome)) : json(nullptr);
  j["message"] = v.message ? json(trustrepair::to_string(*v.message)) : json(nullptr);
  j["message_text"] = v.message_text;
  j["counting_time_limit_s"] = v.counting_time_limit_s;
  return j;
}

}  // namespace

HttpService::HttpService(SessionManager& sessions, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(sessions)) {
  auto& server = impl_->server;
  SessionManager& mgr = impl_->sessions;

  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/sessions", guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    SessionRequest request = detail::request_from_json(body, mgr.default_request());
    if (!body.contains("seed")) {
      std::random_device rd;
      request.env.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    const std::string id = mgr.create_session(request);
    send_json(res, ordered_json{{"session_id", id}}, 201);
  }));

  server.Get(R"(/sessions/([A-Za-z0-9_-]+)/trial)",
             guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
               send_json(res, view_json(mgr.trial_state(req.matches[1])));
             }));

  server.Post(R"(/sessions/([A-Za-z0-9_-]+)/action)",
              guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                HumanAction action;
                try {
                  action = parse_action(field<std::string>(body, "action"));
                } catch (const DomainError& e) {
                  throw ValidationError(e.what());
                }
                const ActionResult r = mgr.submit_action(req.matches[1], action);
                send_json(res, ordered_json{
                                   {"outcome", trustrepair::to_string(r.outcome)},
                                   {"message", trustrepair::to_string(r.message)},
                                   {"message_text", r.message_text},
                                   {"delivery_score_delta", r.delivery_score_delta},
                                   {"phase", to_string(r.phase)},
                               });
              }));

  server.Post(R"(/sessions/([A-Za-z0-9_-]+)/manual)",
              guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                const int delta =
                    mgr.submit_manual_result(req.matches[1], field<bool>(body, "completed"));
                send_json(res, ordered_json{{"delivery_score_delta", delta},
                                            {"phase", to_string(Phase::Counting)}});
              }));

  server.Post(R"(/sessions/([A-Za-z0-9_-]+)/count)",
              guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                const bool timed_out = body.value("timed_out", false);
                const int answer = timed_out ? body.value("answer", 0) : field<int>(body, "answer");
                const int expected = field<int>(body, "expected");
                const int delta = mgr.submit_count(req.matches[1], answer, expected, timed_out);
                send_json(res, ordered_json{{"counting_score_delta", delta},
                                            {"phase", to_string(Phase::AwaitingTrustReport)}});
              }));

  server.Post(R"(/sessions/([A-Za-z0-9_-]+)/trust)",
              guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                const Phase phase = mgr.submit_trust_report(req.matches[1], field<int>(body, "value"));
                send_json(res, ordered_json{{"phase", to_string(phase)},
                                            {"finished", phase == Phase::Finished}});
              }));

  server.Get(R"(/sessions/([A-Za-z0-9_-]+)/estimate)",
             guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
               const TrustEstimate e = mgr.trust_estimate(req.matches[1]);
               send_json(res, ordered_json{{"p_high", e.p_high},
                                           {"trace", e.trace},
                                           {"impossible", e.impossible}});
             }));

  server.Get(R"(/sessions/([A-Za-z0-9_-]+)/log)",
             guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
               const SessionLog log = mgr.export_log(req.matches[1]);
               std::ostringstream out;
               write_session(out, log);
               res.set_content(out.str(), "application/x-ndjson");
             }));

  if (!static_dir.empty()) server.set_mount_point("/", static_dir.string());
}

HttpService::~HttpService() = default;

bool HttpService::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int HttpService::bind_to_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpService::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpService::stop() { impl_->server.stop(); }

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace trustrepair::service
