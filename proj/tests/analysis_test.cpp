#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "trustrepair/analysis.hpp"
#include "trustrepair/model_io.hpp"
#include "trustrepair/simulator.hpp"

namespace {

using namespace trustrepair;

// Integer report whose curve value is nearest to p; none when p lies outside
// the range the 1..10 scale can express.
std::optional<int> invert_paper_curve(double p) {
  const auto& c = kPaperGroundingCurve;
  if (p >= c.asymptote) return std::nullopt;
  const double r = c.midpoint - std::log(c.asymptote / p - 1.0) / c.slope;
  if (r < 0.5 || r >= 10.5) return std::nullopt;
  return static_cast<int>(std::lround(r));
}

std::vector<SessionLog> self_reporting_cohort(std::size_t n, std::uint64_t seed) {
  const auto p = paper_reference_params();
  EnvConfig env;
  env.seed = seed;
  std::vector<SessionLog> logs;
  for (const auto& s : simulate_cohort(p, env, UniformRandom{}, n)) {
    SessionLog log = s.log;
    // Every trial of a three-trial group reports the level matching the
    // group's averaged filtered trust.
    const auto trace = high_trust_trace(p, log);
    const auto grouped = three_trial_average(trace);
    for (std::size_t t = 0; t < log.trials.size(); ++t) {
      log.trials[t].reported_trust = invert_paper_curve(grouped.values[t / 3]);
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

TEST(ModelIo, RoundTripIsExact) {
  const auto p = paper_reference_params();
  const auto text = params_to_json(p);
  EXPECT_EQ(params_from_json(text), p);
  EXPECT_NE(text.find(kModelSchema), std::string::npos);
}

TEST(ModelIo, RejectsInvalidModel) {
  auto j = nlohmann::json::parse(params_to_json(paper_reference_params()));
  j["initial"][0] = 0.5;
  EXPECT_THROW(params_from_json(j.dump()), iohmm::ModelError);
  EXPECT_ANY_THROW(params_from_json("{\"schema\": 3}"));
}

TEST(Fit, ReportsDeviationsAndExcludesPractice) {
  EnvConfig env;
  env.n_trials = 30;
  auto cohort = simulate_cohort(paper_reference_params(), env, RoundRobin{}, 20);
  std::vector<SessionLog> logs;
  for (const auto& s : cohort) logs.push_back(s.log);
  logs[0].practice = true;
  iohmm::FitConfig config;
  config.restarts = 3;
  const auto report = fit_sessions(logs, config, paper_reference_params());
  EXPECT_EQ(report.n_sequences, 19u);
  EXPECT_EQ(report.n_practice_excluded, 1u);
  EXPECT_EQ(report.restart_log_likelihoods.size(), 3u);
  double max_dev = 0.0;
  for (std::size_t i = 0; i < report.transition_deviation.size(); ++i) {
    EXPECT_DOUBLE_EQ(report.transition_deviation[i], std::abs(
                     report.fitted.transition_data()[i] - report.reference.transition_data()[i]));
    max_dev = std::max(max_dev, std::abs(report.transition_deviation[i]));
  }
  EXPECT_GE(report.max_abs_deviation, max_dev);
  // The fitted high-trust state deploys more on low-complexity trials.
  EXPECT_GE(report.fitted.emission(0, kHighTrust, 0), report.fitted.emission(0, kLowTrust, 0));

  std::stringstream structured;
  write_report(structured, report, ReportFormat::Structured);
  const auto j = nlohmann::json::parse(structured.str());
  EXPECT_EQ(j["schema"], kFitReportSchema);
  EXPECT_EQ(params_from_json(j.dump()), report.fitted);
  std::stringstream table;
  write_report(table, report, ReportFormat::Table);
  EXPECT_NE(table.str().find("max |deviation|"), std::string::npos);
}

TEST(Fit, OnlyPracticeSessionsIsAnError) {
  EnvConfig env;
  env.n_trials = 5;
  auto s = simulate_session(paper_reference_params(), env, UniformRandom{}, "p", true);
  const std::vector<SessionLog> logs{s.log};
  EXPECT_THROW(fit_sessions(logs, iohmm::FitConfig{}, paper_reference_params()), AnalysisError);
}

TEST(Filter, RowsMatchTrustTrace) {
  EnvConfig env;
  env.n_trials = 12;
  const auto p = paper_reference_params();
  auto cohort = simulate_cohort(p, env, UniformRandom{}, 3);
  std::vector<SessionLog> logs;
  for (const auto& s : cohort) logs.push_back(s.log);
  const auto result = filter_sessions(p, logs);
  ASSERT_EQ(result.rows.size(), 36u);
  const auto trace = high_trust_trace(p, logs[1]);
  for (std::size_t t = 0; t < 12; ++t) {
    EXPECT_EQ(result.rows[12 + t].session_id, logs[1].participant_id);
    EXPECT_EQ(result.rows[12 + t].trial, static_cast<int>(t + 1));
    EXPECT_EQ(result.rows[12 + t].p_high, trace[t]);
  }
  std::stringstream csv;
  write_filter_csv(csv, result);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "session_id,trial,p_high");
}

TEST(Filter, ImpossibleSessionSkippedWithWarning) {
  auto p = paper_reference_params();
  // Make manual deliveries impossible for high trust at low complexity and
  // force trust to stay high.
  p.initial()[kHighTrust] = 1.0;
  p.initial()[kLowTrust] = 0.0;
  SessionLog bad{"bad", false, {}};
  TrialRecord t;
  t.human_action = HumanAction::Manual;
  t.outcome = Outcome::NotApplicable;
  bad.trials.push_back(t);
  EnvConfig env;
  env.n_trials = 3;
  const std::vector<SessionLog> logs{bad, simulate_session(paper_reference_params(), env,
                                                           UniformRandom{}).log};
  const auto result = filter_sessions(p, logs);
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_NE(result.warnings[0].find("bad"), std::string::npos);
  EXPECT_EQ(result.rows.size(), 3u);
}

TEST(Grounding, MedianPairsByLevel) {
  const std::vector<GroupedPoint> points{
      {"a", 0, 2.2, 0.1, false}, {"a", 1, 1.8, 0.3, false}, {"b", 0, 2.0, 0.2, false},
      {"b", 1, 7.0, 0.8, false}};
  const auto pairs = median_pairs_by_level(points);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].report, 2.0);
  EXPECT_DOUBLE_EQ(pairs[0].probability, 0.2);
  EXPECT_EQ(pairs[1].report, 7.0);
}

TEST(Grounding, ConstantReporterExcluded) {
  auto logs = self_reporting_cohort(30, 5);
  for (auto& t : logs[3].trials) t.reported_trust = 6;
  const auto analysis = run_grounding(paper_reference_params(), logs, PairMode::Median);
  ASSERT_EQ(analysis.excluded_sessions.size(), 1u);
  EXPECT_EQ(analysis.excluded_sessions[0], logs[3].participant_id);
  EXPECT_FALSE(analysis.warnings.empty());
}

TEST(Grounding, SelfConsistentRoundTrip) {
  const auto logs = self_reporting_cohort(300, 11);
  const auto analysis = run_grounding(paper_reference_params(), logs, PairMode::Median);
  const auto& c = analysis.fit.curve;
  EXPECT_NEAR(c.asymptote, 0.9642, 0.05 * 0.9642);
  EXPECT_NEAR(c.slope, 0.8267, 0.05 * 0.8267);
  EXPECT_NEAR(c.midpoint, 4.911, 0.05 * 4.911);
}

TEST(Grounding, NoUsableReportsIsAnError) {
  EnvConfig env;
  env.n_trials = 6;
  const std::vector<SessionLog> logs{
      simulate_session(paper_reference_params(), env, UniformRandom{}).log};
  EXPECT_THROW(run_grounding(paper_reference_params(), logs, PairMode::Median), AnalysisError);
}

TEST(Summary, CountsEvents) {
  EnvConfig env;
  env.n_trials = 10;
  const auto cohort = simulate_cohort(paper_reference_params(), env, UniformRandom{}, 4);
  const auto summary = summarize(cohort);
  EXPECT_EQ(summary.sessions, 4u);
  EXPECT_EQ(summary.trials, 40u);
  std::size_t total = 0;
  for (auto c : summary.event_counts) total += c;
  EXPECT_EQ(total, 40u);
}

}  // namespace
