#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <iostream>

#include "trustrepair/http_service.hpp"
#include "trustrepair/model_io.hpp"

namespace {

trustrepair::service::HttpService* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace trustrepair;

  CLI::App app{"Experiment service for the trust-repair delivery study", "trustrepair-service"};
  std::string host = env_or("TRUSTREPAIR_HOST", "127.0.0.1");
  int port = std::stoi(env_or("TRUSTREPAIR_PORT", "8080"));
  std::string data_dir = env_or("TRUSTREPAIR_DATA_DIR", "sessions");
  std::string params_file;
  std::string static_dir;
  std::string policy = "uniform";
  int n_trials = 60;
  double success_probability = 0.75;
  double p_high = 0.5;
  double time_limit = 15.0;

  app.add_option("--host", host, "Listen address");
  app.add_option("--port", port, "Listen port");
  app.add_option("--data-dir", data_dir, "Directory for session journals and logs");
  app.add_option("--params", params_file, "Model parameter file (default: reference model)");
  app.add_option("--static-dir", static_dir, "Serve a browser client from this directory");
  app.add_option("--policy", policy, "Default repair policy");
  app.add_option("--trials", n_trials, "Default trials per session")->check(CLI::Range(1, 65));
  app.add_option("--success-probability", success_probability)->check(CLI::Range(0.0, 1.0));
  app.add_option("--p-high", p_high, "Probability of a high-complexity trial")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--counting-time-limit", time_limit, "Seconds per counting question");
  CLI11_PARSE(app, argc, argv);

  try {
    service::ServiceConfig config;
    config.data_dir = data_dir;
    if (!params_file.empty()) config.model = read_params_file(params_file);
    config.default_env.n_trials = n_trials;
    config.default_env.success_probability = success_probability;
    config.default_env.complexity = IidComplexity{p_high};
    config.default_policy = parse_policy(policy);
    config.counting_time_limit_s = time_limit;

    service::SessionManager sessions(std::move(config));
    const std::size_t recovered = sessions.recover();
    if (recovered > 0) std::cerr << "recovered " << recovered << " session(s)\n";

    service::HttpService server(sessions, static_dir);
    g_server = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cerr << "listening on " << host << ':' << port << '\n';
    if (!server.listen(host, port)) {
      std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
