#include "cli_app.hpp"

#include <glob.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "trustrepair/analysis.hpp"
#include "trustrepair/model_io.hpp"
#include "trustrepair/session_log.hpp"
#include "trustrepair/simulator.hpp"
#include "trustrepair/trust_domain.hpp"

namespace trustrepair::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::uint64_t seed = 0;
  std::string out;
  bool paper_params = false;
  std::string params_file;
  std::string format = "table";
};

struct EnvOptions {
  int n_trials = 60;
  double success_probability = 0.75;
  double p_high = 0.5;
  std::string schedule;  // e.g. "LHHL..." overrides p_high
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_out = true) {
  cmd->add_option("--seed", o.seed, "Root random seed");
  if (with_out) cmd->add_option("--out", o.out, "Output file (default: stdout)");
  cmd->add_flag("--paper-params", o.paper_params, "Use the reference trust model");
  cmd->add_option("--params", o.params_file, "Model parameter file (JSON, or a fit report)");
  cmd->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"table", "structured"}));
}

void add_env(CLI::App* cmd, EnvOptions& e) {
  cmd->add_option("--trials", e.n_trials, "Trials per session")->check(CLI::PositiveNumber);
  cmd->add_option("--success-probability", e.success_probability,
                  "Autonomous delivery success probability")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--p-high", e.p_high, "Probability of a high-complexity trial")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--schedule", e.schedule, "Explicit complexity schedule, e.g. LHLH...");
}

EnvConfig make_env(const EnvOptions& e, std::uint64_t seed) {
  EnvConfig env;
  env.n_trials = e.n_trials;
  env.success_probability = e.success_probability;
  env.seed = seed;
  if (e.schedule.empty()) {
    env.complexity = IidComplexity{e.p_high};
  } else {
    std::vector<Complexity> schedule;
    for (char c : e.schedule) schedule.push_back(parse_complexity(std::string(1, c)));
    env.complexity = std::move(schedule);
  }
  return env;
}

ReportFormat parse_format(const std::string& f) {
  return f == "structured" ? ReportFormat::Structured : ReportFormat::Table;
}

std::optional<iohmm::ModelParams> load_model(const CommonOptions& o) {
  if (!o.params_file.empty() && o.paper_params) {
    throw std::invalid_argument("--params and --paper-params are mutually exclusive");
  }
  if (!o.params_file.empty()) return read_params_file(o.params_file);
  if (o.paper_params) return paper_reference_params();
  return std::nullopt;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& patterns) {
  std::vector<fs::path> paths;
  for (const auto& pattern : patterns) {
    if (pattern.find_first_of("*?[") == std::string::npos) {
      if (!fs::exists(pattern)) throw std::runtime_error("input file not found: " + pattern);
      paths.emplace_back(pattern);
      continue;
    }
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) {
        const std::string match = g.gl_pathv[i];
        // Hidden-trust sidecars sit next to simulated logs; wildcards skip them.
        if (match.ends_with(".hidden.jsonl")) continue;
        paths.emplace_back(match);
      }
    }
    ::globfree(&g);
    if (rc != 0) throw std::runtime_error("no files match " + pattern);
  }
  if (paths.empty()) throw std::runtime_error("no input session logs");
  return paths;
}

/// Writes to --out when given, else to `fallback`.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

int cmd_simulate(const CommonOptions& o, const EnvOptions& e, const std::string& policy_text,
                 std::size_t participants, bool practice, std::ostream& out, std::ostream& err) {
  const iohmm::ModelParams params = load_model(o).value_or(paper_reference_params());
  const MessagePolicy policy = parse_policy(policy_text);
  const auto cohort = simulate_cohort(params, make_env(e, o.seed), policy, participants,
                                      practice ? "practice" : "sim", practice);
  std::vector<SessionLog> logs;
  for (const auto& s : cohort) logs.push_back(s.log);

  if (o.out.empty()) {
    write_sessions(out, logs);
    write_summary(err, summarize(cohort), parse_format(o.format));
    return 0;
  }
  {
    Output log_out(o.out, out);
    write_sessions(*log_out, logs);
  }
  {
    const fs::path sidecar = hidden_trust_path(o.out);
    std::ofstream hidden(sidecar);
    if (!hidden) throw std::runtime_error("cannot write " + sidecar.string());
    for (const auto& s : cohort) write_hidden_trust(hidden, s.log.participant_id, s.hidden_trust);
  }
  write_summary(out, summarize(cohort), parse_format(o.format));
  return 0;
}

int cmd_fit(const CommonOptions& o, const std::vector<std::string>& inputs,
            iohmm::FitConfig config, std::ostream& out, std::ostream& err) {
  const auto sessions = read_session_files(expand_inputs(inputs));
  config.seed = o.seed;
  const iohmm::ModelParams reference = load_model(o).value_or(paper_reference_params());
  const ComparisonReport report = fit_sessions(sessions, config, reference);
  Output dest(o.out, out);
  write_report(*dest, report, parse_format(o.format));
  if (!o.out.empty()) {
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  }
  return 0;
}

int cmd_filter(const CommonOptions& o, const std::vector<std::string>& inputs, std::ostream& out,
               std::ostream& err) {
  const auto params = load_model(o);
  if (!params) throw std::invalid_argument("filter needs --params FILE or --paper-params");
  const auto sessions = read_session_files(expand_inputs(inputs));
  const FilterResult result = filter_sessions(*params, sessions);
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  Output dest(o.out, out);
  write_filter_csv(*dest, result);
  return 0;
}

int cmd_ground(const CommonOptions& o, const std::vector<std::string>& inputs,
               const std::string& pairs, std::ostream& out, std::ostream& err) {
  const auto params = load_model(o);
  if (!params) throw std::invalid_argument("ground needs --params FILE or --paper-params");
  const auto sessions = read_session_files(expand_inputs(inputs));
  const GroundingAnalysis analysis =
      run_grounding(*params, sessions, pairs == "mean" ? PairMode::Mean : PairMode::Median);
  for (const auto& w : analysis.warnings) err << "warning: " << w << '\n';
  if (o.out.empty()) {
    write_grounding_csv(out, analysis);
    write_grounding_curve(err, analysis, parse_format(o.format));
    return 0;
  }
  {
    Output dest(o.out, out);
    write_grounding_csv(*dest, analysis);
  }
  fs::path curve_path = o.out;
  curve_path.replace_filename(fs::path(o.out).stem().string() + ".curve.json");
  std::ofstream curve(curve_path);
  write_grounding_curve(curve, analysis, ReportFormat::Structured);
  write_grounding_curve(out, analysis, parse_format(o.format));
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const EnvOptions& e,
                 const std::vector<std::string>& policy_texts, std::size_t n_mc,
                 std::ostream& out) {
  const iohmm::ModelParams params = load_model(o).value_or(paper_reference_params());
  std::vector<MessagePolicy> policies;
  for (const auto& p : policy_texts) policies.push_back(parse_policy(p));
  const auto estimates = evaluate_policy(params, make_env(e, o.seed), policies, n_mc);
  Output dest(o.out, out);
  write_policy_table(*dest, estimates, parse_format(o.format));
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trust-modulated behavior model toolkit", "trustrepair"};
  app.require_subcommand(1);

  CommonOptions common;
  EnvOptions env;

  auto* simulate = app.add_subcommand("simulate", "Simulate a cohort of synthetic participants");
  std::string sim_policy = "uniform";
  std::size_t participants = 16;
  bool practice = false;
  add_common(simulate, common);
  add_env(simulate, env);
  simulate->add_option("--policy", sim_policy,
                       "Repair policy: fixed:<short|long|apology|denial>, uniform, round-robin, "
                       "scripted:<m1,m2,...>");
  simulate->add_option("--participants", participants, "Number of sessions")
      ->check(CLI::PositiveNumber);
  simulate->add_flag("--practice", practice, "Mark the sessions as practice sessions");

  auto* fit = app.add_subcommand("fit", "Fit the trust model to session logs with Baum-Welch");
  std::vector<std::string> inputs;
  iohmm::FitConfig fit_config;
  add_common(fit, common);
  fit->add_option("logs", inputs, "Session-log files or glob patterns")->required();
  fit->add_option("--restarts", fit_config.restarts, "Random restarts")->check(CLI::PositiveNumber);
  fit->add_option("--max-iterations", fit_config.max_iterations, "EM iteration limit")
      ->check(CLI::PositiveNumber);
  fit->add_option("--tolerance", fit_config.tolerance, "Log-likelihood improvement threshold");
  fit->add_option("--smoothing", fit_config.smoothing, "Probability floor");
  fit->add_option("--threads", fit_config.threads, "Worker threads (0 = all cores)");

  auto* filter = app.add_subcommand("filter", "Per-trial predictive P(high trust)");
  add_common(filter, common);
  filter->add_option("logs", inputs, "Session-log files or glob patterns")->required();

  auto* ground = app.add_subcommand("ground", "Fit the grounding curve against trust reports");
  std::string pairs = "median";
  add_common(ground, common);
  ground->add_option("logs", inputs, "Session-log files or glob patterns")->required();
  ground->add_option("--pairs", pairs, "Pairs fed to the curve fit")
      ->check(CLI::IsMember({"median", "mean"}));

  auto* evaluate = app.add_subcommand("evaluate-policy", "Compare repair policies by Monte Carlo");
  std::vector<std::string> policy_texts;
  std::size_t n_mc = 10000;
  add_common(evaluate, common);
  add_env(evaluate, env);
  evaluate->add_option("--policy", policy_texts, "Policy to evaluate (repeatable)")->required();
  evaluate->add_option("--n-mc", n_mc, "Monte Carlo replicates")->check(CLI::PositiveNumber);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*simulate) return cmd_simulate(common, env, sim_policy, participants, practice, out, err);
    if (*fit) return cmd_fit(common, inputs, fit_config, out, err);
    if (*filter) return cmd_filter(common, inputs, out, err);
    if (*ground) return cmd_ground(common, inputs, pairs, out, err);
    if (*evaluate) return cmd_evaluate(common, env, policy_texts, n_mc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace trustrepair::cli
