#include "trustrepair/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include <json.hpp>

#include "json_detail.hpp"

namespace trustrepair {

using nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> abs_diff(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::abs(a[i] - b[i]);
  return out;
}

}  // namespace

ComparisonReport compare_params(const iohmm::ModelParams& fitted,
                                const iohmm::ModelParams& reference) {
  if (fitted.spec() != reference.spec()) {
    throw AnalysisError("fitted and reference models have different alphabets");
  }
  ComparisonReport report;
  report.fitted = fitted;
  report.reference = reference;
  report.initial_deviation = abs_diff(fitted.initial(), reference.initial());
  report.transition_deviation = abs_diff(fitted.transition_data(), reference.transition_data());
  report.emission_deviation = abs_diff(fitted.emission_data(), reference.emission_data());
  for (const auto* v : {&report.initial_deviation, &report.transition_deviation,
                        &report.emission_deviation}) {
    for (double d : *v) report.max_abs_deviation = std::max(report.max_abs_deviation, d);
  }
  return report;
}

ComparisonReport fit_sessions(std::span<const SessionLog> sessions,
                              const iohmm::FitConfig& config,
                              const iohmm::ModelParams& reference) {
  std::vector<iohmm::SequenceData> sequences;
  std::size_t practice = 0;
  for (const auto& log : sessions) {
    if (log.practice) {
      ++practice;
      continue;
    }
    sequences.push_back(session_to_sequence(log));
  }
  if (sequences.empty()) throw AnalysisError("no usable (non-practice) sessions to fit");

  const iohmm::FitReport fit = iohmm::baum_welch(kTrustAlphabet, sequences, config);
  const iohmm::CanonicalStates canonical = canonicalize_trust_states(fit.params);

  ComparisonReport report = compare_params(canonical.params, reference);
  report.counts = fit.input_symbol_counts;
  report.log_likelihood = fit.log_likelihood();
  report.converged = fit.converged;
  report.iterations = fit.log_likelihood_trace.size();
  report.restart_log_likelihoods = fit.restart_log_likelihoods;
  report.canonical_tie = canonical.tie;
  report.n_sequences = sequences.size();
  report.n_practice_excluded = practice;
  for (TransitionEvent e : kAllEvents) {
    if (report.counts.transition[index_of(e)] == 0) {
      report.warnings.push_back("transition input '" + std::string(to_string(e)) +
                                "' never observed; its rows keep their initial values");
    }
  }
  for (Complexity c : {Complexity::Low, Complexity::High}) {
    if (report.counts.emission[index_of(c)] == 0) {
      report.warnings.push_back("complexity '" + std::string(to_string(c)) +
                                "' never observed; its emission rows keep their initial values");
    }
  }
  if (canonical.tie) {
    report.warnings.push_back("states tie on P(auto | low complexity); labels left as fitted");
  }
  if (!fit.converged) report.warnings.push_back("Baum-Welch hit the iteration limit");
  return report;
}

namespace {

ordered_json tensor3(std::span<const double> flat, std::size_t a, std::size_t b, std::size_t c) {
  ordered_json out = ordered_json::array();
  for (std::size_t i = 0; i < a; ++i) {
    ordered_json rows = ordered_json::array();
    for (std::size_t j = 0; j < b; ++j) {
      const auto first = flat.begin() + static_cast<std::ptrdiff_t>((i * b + j) * c);
      rows.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(c)));
    }
    out.push_back(std::move(rows));
  }
  return out;
}

std::string state_label(std::size_t s, std::size_t n_states) {
  if (n_states == 2) return s == kHighTrust ? "high" : "low";
  return "s" + std::to_string(s);
}

}  // namespace

void write_report(std::ostream& out, const ComparisonReport& report, ReportFormat format) {
  const auto& spec = report.fitted.spec();
  const bool trust_model = spec == kTrustAlphabet;
  if (format == ReportFormat::Structured) {
    ordered_json j;
    j["schema"] = kFitReportSchema;
    j["log_likelihood"] = report.log_likelihood;
    j["converged"] = report.converged;
    j["iterations"] = report.iterations;
    j["restart_log_likelihoods"] = report.restart_log_likelihoods;
    j["canonical_tie"] = report.canonical_tie;
    j["n_sequences"] = report.n_sequences;
    j["n_practice_excluded"] = report.n_practice_excluded;
    ordered_json counts;
    ordered_json transition_counts;
    for (std::size_t u = 0; u < report.counts.transition.size(); ++u) {
      const std::string key = trust_model ? std::string(to_string(static_cast<TransitionEvent>(u)))
                                          : std::to_string(u);
      transition_counts[key] = report.counts.transition[u];
    }
    ordered_json emission_counts;
    for (std::size_t c = 0; c < report.counts.emission.size(); ++c) {
      const std::string key =
          trust_model ? std::string(to_string(static_cast<Complexity>(c))) : std::to_string(c);
      emission_counts[key] = report.counts.emission[c];
    }
    counts["transition"] = std::move(transition_counts);
    counts["emission"] = std::move(emission_counts);
    j["input_symbol_counts"] = std::move(counts);
    j["params"] = detail::params_json(report.fitted);
    j["reference"] = detail::params_json(report.reference);
    j["deviation"] = {
        {"initial", report.initial_deviation},
        {"transition", tensor3(report.transition_deviation, spec.n_transition_inputs,
                               spec.n_states, spec.n_states)},
        {"emission",
         tensor3(report.emission_deviation, spec.n_emission_inputs, spec.n_states, spec.n_outputs)},
    };
    j["max_abs_deviation"] = report.max_abs_deviation;
    j["warnings"] = report.warnings;
    out << j.dump(2) << '\n';
    return;
  }

  const std::size_t S = spec.n_states;
  out << "log-likelihood " << fixed(report.log_likelihood, 6) << "  sequences "
      << report.n_sequences << "  iterations " << report.iterations
      << (report.converged ? "  (converged)" : "  (iteration limit)") << '\n';
  if (report.n_practice_excluded) {
    out << "practice sessions excluded: " << report.n_practice_excluded << '\n';
  }
  out << "\ninitial state distribution\n";
  out << "  state   fitted  reference  |dev|\n";
  for (std::size_t s = 0; s < S; ++s) {
    out << "  " << state_label(s, S) << (S == 2 && s == kLowTrust ? " " : "") << "    "
        << fixed(report.fitted.initial()[s]) << "  " << fixed(report.reference.initial()[s])
        << "     " << fixed(report.initial_deviation[s]) << '\n';
  }
  out << "\ntransitions P(next | state, previous event)\n";
  out << "  event              count  state -> next   fitted  reference  |dev|\n";
  for (std::size_t u = 0; u < spec.n_transition_inputs; ++u) {
    const std::string name =
        trust_model ? std::string(to_string(static_cast<TransitionEvent>(u))) : std::to_string(u);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t n = 0; n < S; ++n) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-18s %5zu  %-5s -> %-5s  %s  %s     %s\n",
                      name.c_str(), report.counts.transition[u], state_label(s, S).c_str(),
                      state_label(n, S).c_str(), fixed(report.fitted.transition(u, s, n)).c_str(),
                      fixed(report.reference.transition(u, s, n)).c_str(),
                      fixed(report.transition_deviation[(u * S + s) * S + n]).c_str());
        out << line;
      }
    }
  }
  out << "\nemissions P(action | state, complexity)\n";
  out << "  complexity  count  state  action   fitted  reference  |dev|\n";
  for (std::size_t c = 0; c < spec.n_emission_inputs; ++c) {
    const std::string name =
        trust_model ? std::string(to_string(static_cast<Complexity>(c))) : std::to_string(c);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t y = 0; y < spec.n_outputs; ++y) {
        const std::string action =
            trust_model ? std::string(to_string(static_cast<HumanAction>(y))) : std::to_string(y);
        char line[160];
        std::snprintf(line, sizeof line, "  %-10s %6zu  %-5s  %-6s   %s  %s     %s\n",
                      name.c_str(), report.counts.emission[c], state_label(s, S).c_str(),
                      action.c_str(), fixed(report.fitted.emission(c, s, y)).c_str(),
                      fixed(report.reference.emission(c, s, y)).c_str(),
                      fixed(report.emission_deviation[(c * S + s) * spec.n_outputs + y]).c_str());
        out << line;
      }
    }
  }
  out << "\nmax |deviation| " << fixed(report.max_abs_deviation) << '\n';
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
}

FilterResult filter_sessions(const iohmm::ModelParams& params,
                             std::span<const SessionLog> sessions) {
  if (sessions.empty()) throw AnalysisError("no sessions to filter");
  iohmm::validate_params(params);
  FilterResult result;
  for (const auto& log : sessions) {
    if (log.trials.empty()) throw AnalysisError("session '" + log.participant_id + "' is empty");
    std::vector<double> trace;
    try {
      iohmm::forward_scaled(params, session_to_sequence(log));
      trace = high_trust_trace(params, log);
    } catch (const iohmm::ImpossibleSequenceError& e) {
      result.warnings.push_back("session '" + log.participant_id + "' skipped: trial " +
                                std::to_string(e.step() + 1) +
                                " is impossible under the model");
      continue;
    }
    for (std::size_t t = 0; t < trace.size(); ++t) {
      result.rows.push_back({log.participant_id, log.trials[t].trial_index, trace[t]});
    }
  }
  return result;
}

void write_filter_csv(std::ostream& out, const FilterResult& result) {
  out << "session_id,trial,p_high\n";
  for (const auto& row : result.rows) {
    out << row.session_id << ',' << row.trial << ',' << exact(row.p_high) << '\n';
  }
}

std::vector<GroundingPair> median_pairs_by_level(std::span<const GroupedPoint> points) {
  std::map<int, std::vector<double>> by_level;
  for (const auto& p : points) {
    const int level = std::clamp(static_cast<int>(std::lround(p.report)), 1, 10);
    by_level[level].push_back(p.probability);
  }
  std::vector<GroundingPair> pairs;
  for (auto& [level, values] : by_level) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median =
        n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    pairs.push_back({static_cast<double>(level), median});
  }
  return pairs;
}

GroundingAnalysis run_grounding(const iohmm::ModelParams& params,
                                std::span<const SessionLog> sessions, PairMode mode) {
  GroundingAnalysis analysis;
  analysis.mode = mode;
  for (const auto& log : sessions) {
    if (log.practice) continue;
    std::vector<double> reports;
    for (const auto& trial : log.trials) {
      if (trial.reported_trust) reports.push_back(*trial.reported_trust);
    }
    if (reports.empty()) {
      analysis.excluded_sessions.push_back(log.participant_id);
      analysis.warnings.push_back("session '" + log.participant_id +
                                  "' excluded: no trust reports");
      continue;
    }
    if (std::all_of(reports.begin(), reports.end(),
                    [&](double r) { return r == reports.front(); })) {
      analysis.excluded_sessions.push_back(log.participant_id);
      analysis.warnings.push_back("session '" + log.participant_id +
                                  "' excluded: constant trust reports");
      continue;
    }
    std::vector<double> full_trace;
    try {
      iohmm::forward_scaled(params, session_to_sequence(log));
      full_trace = high_trust_trace(params, log);
    } catch (const iohmm::ImpossibleSequenceError&) {
      analysis.excluded_sessions.push_back(log.participant_id);
      analysis.warnings.push_back("session '" + log.participant_id +
                                  "' excluded: impossible under the model");
      continue;
    }
    // Trials without a report drop out; groups are formed over the rest.
    std::vector<double> trace;
    for (std::size_t t = 0; t < log.trials.size(); ++t) {
      if (log.trials[t].reported_trust) trace.push_back(full_trace[t]);
    }
    if (reports.size() < log.trials.size()) {
      analysis.warnings.push_back("session '" + log.participant_id + "': " +
                                  std::to_string(log.trials.size() - reports.size()) +
                                  " trial(s) without a trust report ignored");
    }
    const GroupedAverage r = three_trial_average(reports);
    const GroupedAverage p = three_trial_average(trace);
    for (std::size_t g = 0; g < r.values.size(); ++g) {
      const bool remainder = r.has_remainder && g + 1 == r.values.size();
      analysis.points.push_back({log.participant_id, g, r.values[g], p.values[g], remainder});
      analysis.mean_pairs.push_back({r.values[g], p.values[g]});
    }
  }
  if (analysis.points.empty()) throw AnalysisError("no sessions with usable trust reports");
  analysis.median_pairs = median_pairs_by_level(analysis.points);
  const auto& pairs = mode == PairMode::Median ? analysis.median_pairs : analysis.mean_pairs;
  analysis.fit = fit_grounding(pairs);
  for (const auto& w : analysis.fit.warnings) analysis.warnings.push_back(w);
  return analysis;
}

void write_grounding_csv(std::ostream& out, const GroundingAnalysis& analysis) {
  out << "kind,session_id,group,report,probability\n";
  for (const auto& p : analysis.points) {
    out << "group," << p.session_id << ',' << p.group + 1 << ',' << exact(p.report) << ','
        << exact(p.probability) << '\n';
  }
  for (const auto& p : analysis.median_pairs) {
    out << "median,," << ',' << exact(p.report) << ',' << exact(p.probability) << '\n';
  }
}

void write_grounding_curve(std::ostream& out, const GroundingAnalysis& analysis,
                           ReportFormat format) {
  const GroundingCurve& c = analysis.fit.curve;
  if (format == ReportFormat::Structured) {
    ordered_json j;
    j["schema"] = "trustrepair.grounding/1";
    j["pairs"] = analysis.mode == PairMode::Median ? "median" : "mean";
    j["L"] = c.asymptote;
    j["k"] = c.slope;
    j["x0"] = c.midpoint;
    j["residual_norm"] = analysis.fit.residual_norm;
    j["n_pairs"] = analysis.mode == PairMode::Median ? analysis.median_pairs.size()
                                                     : analysis.mean_pairs.size();
    j["excluded_sessions"] = analysis.excluded_sessions;
    j["warnings"] = analysis.warnings;
    out << j.dump(2) << '\n';
    return;
  }
  out << "grounding curve (" << (analysis.mode == PairMode::Median ? "median" : "mean")
      << " pairs): L=" << fixed(c.asymptote) << " k=" << fixed(c.slope)
      << " x0=" << fixed(c.midpoint) << " residual=" << fixed(analysis.fit.residual_norm, 6)
      << '\n';
}

SimulationSummary summarize(std::span<const SimulatedSession> cohort) {
  SimulationSummary s;
  s.event_counts.assign(kAllEvents.size(), 0);
  std::size_t autos = 0;
  double total = 0.0;
  for (const auto& session : cohort) {
    ++s.sessions;
    total += session.total_delivery_score;
    for (const auto& trial : session.log.trials) {
      ++s.trials;
      if (trial.human_action == HumanAction::AutoDeploy) ++autos;
      if (trial.outcome == Outcome::Failure) ++s.failures;
      ++s.event_counts[index_of(trial.event())];
    }
  }
  if (s.sessions) s.mean_total_score = total / static_cast<double>(s.sessions);
  if (s.trials) s.auto_fraction = static_cast<double>(autos) / static_cast<double>(s.trials);
  return s;
}

void write_summary(std::ostream& out, const SimulationSummary& summary, ReportFormat format) {
  if (format == ReportFormat::Structured) {
    ordered_json j;
    j["schema"] = "trustrepair.simulation_summary/1";
    j["sessions"] = summary.sessions;
    j["trials"] = summary.trials;
    j["mean_total_score"] = summary.mean_total_score;
    j["auto_fraction"] = summary.auto_fraction;
    j["failures"] = summary.failures;
    ordered_json events;
    for (TransitionEvent e : kAllEvents) events[std::string(to_string(e))] = summary.event_counts[index_of(e)];
    j["event_counts"] = std::move(events);
    out << j.dump(2) << '\n';
    return;
  }
  out << "sessions " << summary.sessions << ", trials " << summary.trials << '\n'
      << "mean total delivery score " << fixed(summary.mean_total_score, 2) << '\n'
      << "auto-deploy fraction " << fixed(summary.auto_fraction) << ", failures "
      << summary.failures << '\n';
  for (TransitionEvent e : kAllEvents) {
    out << "  " << to_string(e) << ": " << summary.event_counts[index_of(e)] << '\n';
  }
}

void write_policy_table(std::ostream& out, std::span<const PolicyEstimate> estimates,
                        ReportFormat format) {
  if (format == ReportFormat::Structured) {
    ordered_json j;
    j["schema"] = "trustrepair.policy_comparison/1";
    ordered_json rows = ordered_json::array();
    for (const auto& e : estimates) {
      rows.push_back({{"policy", e.policy}, {"mean", e.mean}, {"std_error", e.std_error},
                      {"n_mc", e.n_mc}});
    }
    j["policies"] = std::move(rows);
    out << j.dump(2) << '\n';
    return;
  }
  out << "policy,mean_total_score,std_error,n_mc\n";
  for (const auto& e : estimates) {
    out << e.policy << ',' << fixed(e.mean, 4) << ',' << fixed(e.std_error, 4) << ',' << e.n_mc
        << '\n';
  }
}

}  // namespace trustrepair
