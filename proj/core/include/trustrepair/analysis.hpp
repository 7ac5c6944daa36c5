#pragma once

// Batch analyses behind the command-line tool: fit, filter, ground,
// simulate and evaluate-policy. Everything here works on in-memory session
// logs and writes to streams; file handling lives in the tool.

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trustrepair/grounding.hpp"
#include "trustrepair/iohmm.hpp"
#include "trustrepair/simulator.hpp"
#include "trustrepair/trust_domain.hpp"

namespace trustrepair {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReportFormat { Table, Structured };

inline constexpr const char* kFitReportSchema = "trustrepair.fit_report/1";

/// Fitted model next to a reference model, with elementwise deviations laid
/// out like the parameter tensors.
struct ComparisonReport {
  iohmm::ModelParams fitted;
  iohmm::ModelParams reference;
  std::vector<double> initial_deviation;
  std::vector<double> transition_deviation;
  std::vector<double> emission_deviation;
  double max_abs_deviation = 0.0;
  iohmm::InputSymbolCounts counts;
  double log_likelihood = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<double> restart_log_likelihoods;
  bool canonical_tie = false;
  std::size_t n_sequences = 0;
  std::size_t n_practice_excluded = 0;
  std::vector<std::string> warnings;
};

/// Drops practice sessions, fits the trust model with Baum-Welch, relabels the
/// states canonically and compares against `reference`.
ComparisonReport fit_sessions(std::span<const SessionLog> sessions,
                              const iohmm::FitConfig& config,
                              const iohmm::ModelParams& reference);

ComparisonReport compare_params(const iohmm::ModelParams& fitted,
                                const iohmm::ModelParams& reference);

void write_report(std::ostream& out, const ComparisonReport& report, ReportFormat format);

struct FilterRow {
  std::string session_id;
  int trial = 0;
  double p_high = 0.0;
};

struct FilterResult {
  std::vector<FilterRow> rows;
  std::vector<std::string> warnings;
};

/// Predictive P(high trust) at the start of every trial. Sessions whose
/// observations are impossible under the model are skipped with a warning.
FilterResult filter_sessions(const iohmm::ModelParams& params,
                             std::span<const SessionLog> sessions);

/// "session_id,trial,p_high" with a header row.
void write_filter_csv(std::ostream& out, const FilterResult& result);

enum class PairMode { Median, Mean };

struct GroupedPoint {
  std::string session_id;
  std::size_t group = 0;  // 0-based three-trial group
  double report = 0.0;
  double probability = 0.0;
  bool remainder = false;
};

struct GroundingAnalysis {
  std::vector<GroupedPoint> points;
  /// One pair per three-trial group and session.
  std::vector<GroundingPair> mean_pairs;
  /// Median probability per rounded self-report level.
  std::vector<GroundingPair> median_pairs;
  PairMode mode = PairMode::Median;
  GroundingFit fit;
  std::vector<std::string> excluded_sessions;
  std::vector<std::string> warnings;
};

/// Median-per-level pairs from grouped points (levels are report values
/// rounded to the nearest integer).
std::vector<GroundingPair> median_pairs_by_level(std::span<const GroupedPoint> points);

GroundingAnalysis run_grounding(const iohmm::ModelParams& params,
                                std::span<const SessionLog> sessions, PairMode mode);

/// "kind,session_id,group,report,probability"; kind is "group" or "median".
void write_grounding_csv(std::ostream& out, const GroundingAnalysis& analysis);
void write_grounding_curve(std::ostream& out, const GroundingAnalysis& analysis,
                           ReportFormat format);

struct SimulationSummary {
  std::size_t sessions = 0;
  std::size_t trials = 0;
  double mean_total_score = 0.0;
  double auto_fraction = 0.0;
  std::size_t failures = 0;
  std::vector<std::size_t> event_counts;  // indexed by TransitionEvent
};

SimulationSummary summarize(std::span<const SimulatedSession> cohort);
void write_summary(std::ostream& out, const SimulationSummary& summary, ReportFormat format);

void write_policy_table(std::ostream& out, std::span<const PolicyEstimate> estimates,
                        ReportFormat format);

}  // namespace trustrepair
