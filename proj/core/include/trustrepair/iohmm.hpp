#pragma once

// Discrete input-output hidden Markov model.
//
// Two input streams drive the model. The emission at step t is conditioned on
// the emission input c_t; the move from step t to t+1 is conditioned on the
// transition input e_t, which is therefore one element shorter than the
// output stream:
//
//   P(S_1 = s)                         = initial[s]
//   P(S_{t+1} = s' | S_t = s, e_t = u) = transition[u](s, s')
//   P(y_t = y | S_t = s, c_t = c)      = emission[c](s, y)

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trustrepair::iohmm {

struct AlphabetSpec {
  std::size_t n_states = 0;
  std::size_t n_transition_inputs = 0;
  std::size_t n_emission_inputs = 0;
  std::size_t n_outputs = 0;

  friend bool operator==(const AlphabetSpec&, const AlphabetSpec&) = default;
};

/// Tolerance for the sum-to-one checks in validate_params().
inline constexpr double kRowSumTolerance = 1e-9;

/// Raised by validate_params() and by anything that rejects a model.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sequence does not fit the alphabet or violates the length layout.
class SequenceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The observations have probability zero under the model.
class ImpossibleSequenceError : public std::runtime_error {
 public:
  ImpossibleSequenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  /// Zero-based step at which all probability mass vanished.
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class FitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Initial distribution plus input-conditioned transition and emission
/// tensors, stored densely in row-major order.
class ModelParams {
 public:
  ModelParams() = default;
  /// All-zero tensors of the right shape.
  explicit ModelParams(const AlphabetSpec& spec);

  /// Every distribution uniform.
  static ModelParams uniform(const AlphabetSpec& spec);

  const AlphabetSpec& spec() const noexcept { return spec_; }

  std::span<double> initial() noexcept { return initial_; }
  std::span<const double> initial() const noexcept { return initial_; }

  std::span<double> transition_row(std::size_t input, std::size_t from);
  std::span<const double> transition_row(std::size_t input,
                                         std::size_t from) const;
  double transition(std::size_t input, std::size_t from, std::size_t to) const {
    return transition_[(input * spec_.n_states + from) * spec_.n_states + to];
  }

  std::span<double> emission_row(std::size_t input, std::size_t state);
  std::span<const double> emission_row(std::size_t input,
                                       std::size_t state) const;
  double emission(std::size_t input, std::size_t state,
                  std::size_t output) const {
    return emission_[(input * spec_.n_states + state) * spec_.n_outputs +
                     output];
  }

  /// Flat views, mostly for serialization and comparisons.
  std::span<const double> transition_data() const noexcept {
    return transition_;
  }
  std::span<const double> emission_data() const noexcept { return emission_; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  AlphabetSpec spec_;
  std::vector<double> initial_;
  std::vector<double> transition_;
  std::vector<double> emission_;
};

/// Outputs y_1..y_T, emission inputs c_1..c_T and transition inputs
/// e_1..e_{T-1}.
struct SequenceData {
  std::vector<std::size_t> outputs;
  std::vector<std::size_t> emission_inputs;
  std::vector<std::size_t> transition_inputs;

  std::size_t length() const noexcept { return outputs.size(); }

  friend bool operator==(const SequenceData&, const SequenceData&) = default;
};

/// Throws ModelError naming the tensor, row and offending sum or entry.
void validate_params(const ModelParams& params);

/// Throws SequenceError unless T >= 1, the lengths follow the SequenceData
/// layout and every symbol is inside the alphabet.
void validate_sequence(const AlphabetSpec& spec, const SequenceData& seq);

/// Row-major T x n_states buffer.
class Lattice {
 public:
  Lattice() = default;
  Lattice(std::size_t steps, std::size_t states)
      : steps_(steps), states_(states), data_(steps * states, 0.0) {}

  std::size_t steps() const noexcept { return steps_; }
  std::size_t states() const noexcept { return states_; }
  std::span<double> operator[](std::size_t t) noexcept {
    return {data_.data() + t * states_, states_};
  }
  std::span<const double> operator[](std::size_t t) const noexcept {
    return {data_.data() + t * states_, states_};
  }

 private:
  std::size_t steps_ = 0;
  std::size_t states_ = 0;
  std::vector<double> data_;
};

struct ForwardResult {
  /// alpha[t] is P(S_t | y_1..y_t, inputs), normalized to sum 1.
  Lattice alpha;
  /// scale[t] = P(y_t | y_1..y_{t-1}, inputs).
  std::vector<double> scale;
  double log_likelihood = 0.0;
};

ForwardResult forward_scaled(const ModelParams& params,
                             const SequenceData& seq);

/// Backward pass sharing the forward scale factors, so that
/// alpha[t](s) * beta[t](s) is the smoothing posterior P(S_t = s | all data).
Lattice backward_scaled(const ModelParams& params, const SequenceData& seq,
                        std::span<const double> scale);

/// Smoothing posteriors gamma[t](s) from a forward/backward pair.
Lattice smoothing_posteriors(const Lattice& alpha, const Lattice& beta);

using Belief = std::vector<double>;

/// Bayes update of a predictive belief on one observation. Throws
/// ImpossibleSequenceError (with `step`) when the observation has zero mass.
Belief condition_on_output(const ModelParams& params,
                           std::span<const double> belief,
                           std::size_t emission_input, std::size_t output,
                           std::size_t step = 0);

/// One transition step: b'(s') = sum_s posterior(s) transition[input](s, s').
Belief propagate(const ModelParams& params, std::span<const double> posterior,
                 std::size_t transition_input);

/// Predictive beliefs at the start of every step.
///
/// Unlike the strict SequenceData layout, the prefix may be empty and may
/// carry either T-1 or T transition inputs. The result is b_1 = initial
/// followed by one propagated belief per transition input, so its length is
/// 1 + transition_inputs.size().
std::vector<Belief> filter_predictive(const ModelParams& params,
                                      const SequenceData& prefix);

struct FitConfig {
  double tolerance = 1e-6;
  std::size_t max_iterations = 500;
  std::size_t restarts = 20;
  std::uint64_t seed = 0;
  double smoothing = 1e-9;
  /// Worker threads for restarts; 0 picks the hardware concurrency.
  std::size_t threads = 0;
};

void validate_fit_config(const FitConfig& config);

struct InputSymbolCounts {
  /// Occurrences of each transition input across all sequences.
  std::vector<std::size_t> transition;
  /// Occurrences of each emission input across all sequences.
  std::vector<std::size_t> emission;
};

struct FitReport {
  ModelParams params;
  /// Log-likelihood of the pooled data at each iteration of the winning run;
  /// the last entry belongs to `params`.
  std::vector<double> log_likelihood_trace;
  bool converged = false;
  InputSymbolCounts input_symbol_counts;
  std::vector<double> restart_log_likelihoods;
  /// Per-restart traces, kept for monotonicity checks.
  std::vector<std::vector<double>> restart_traces;
  std::size_t best_restart = 0;

  double log_likelihood() const {
    return log_likelihood_trace.empty() ? 0.0 : log_likelihood_trace.back();
  }
};

InputSymbolCounts count_input_symbols(const AlphabetSpec& spec,
                                      std::span<const SequenceData> sequences);

/// Model with every distribution drawn as normalized uniform variates.
ModelParams random_params(const AlphabetSpec& spec, std::uint64_t seed);

/// Multi-sequence Baum-Welch. Without `init`, runs config.restarts random
/// initializations and keeps the best final log-likelihood (ties go to the
/// lowest restart index). With `init`, runs once from it. Rows whose input
/// symbol never occurs keep their initial values.
FitReport baum_welch(const AlphabetSpec& spec,
                     std::span<const SequenceData> sequences,
                     const FitConfig& config,
                     const std::optional<ModelParams>& init = std::nullopt);

/// Log-likelihood of a set of sequences (sum over sequences).
double total_log_likelihood(const ModelParams& params,
                            std::span<const SequenceData> sequences);

struct SampledSequence {
  std::vector<std::size_t> hidden_states;
  std::vector<std::size_t> outputs;
};

/// Ancestral sampling given both input streams. transition_inputs must have
/// exactly one element fewer than emission_inputs.
SampledSequence sample_sequence(const ModelParams& params,
                                std::span<const std::size_t> emission_inputs,
                                std::span<const std::size_t> transition_inputs,
                                std::uint64_t seed);

/// States are ordered by decreasing emission[emission_input](s, output).
struct OrderingRule {
  std::size_t emission_input = 0;
  std::size_t output = 0;
};

struct CanonicalStates {
  ModelParams params;
  /// permutation[new_index] = old_index.
  std::vector<std::size_t> permutation;
  /// Two states had (numerically) equal ordering statistics; the identity
  /// permutation was used.
  bool tie = false;
};

CanonicalStates canonicalize_states(const ModelParams& params,
                                    const OrderingRule& rule);

/// Relabels states: result state i is input state permutation[i].
ModelParams permute_states(const ModelParams& params,
                           std::span<const std::size_t> permutation);

}  // namespace trustrepair::iohmm
