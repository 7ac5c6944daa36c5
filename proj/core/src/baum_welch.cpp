#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "trustrepair/iohmm.hpp"
#include "trustrepair/random.hpp"

namespace trustrepair::iohmm {

void validate_fit_config(const FitConfig& config) {
  if (!(config.tolerance > 0.0)) throw FitError("tolerance must be positive");
  if (config.restarts < 1) throw FitError("restarts must be at least 1");
  if (config.max_iterations < 1) {
    throw FitError("max_iterations must be at least 1");
  }
  if (!(config.smoothing >= 0.0 && config.smoothing < 1e-3)) {
    throw FitError("smoothing must lie in [0, 1e-3)");
  }
}

InputSymbolCounts count_input_symbols(const AlphabetSpec& spec,
                                      std::span<const SequenceData> sequences) {
  InputSymbolCounts counts{std::vector<std::size_t>(spec.n_transition_inputs, 0),
                           std::vector<std::size_t>(spec.n_emission_inputs, 0)};
  for (const auto& seq : sequences) {
    for (std::size_t u : seq.transition_inputs) ++counts.transition.at(u);
    for (std::size_t c : seq.emission_inputs) ++counts.emission.at(c);
  }
  return counts;
}

namespace {

void fill_random_distribution(std::span<double> row, Rng& rng) {
  double sum = 0.0;
  for (double& v : row) {
    v = rng.uniform();
    sum += v;
  }
  if (!(sum > 0.0)) {
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
    return;
  }
  for (double& v : row) v /= sum;
}

}  // namespace

ModelParams random_params(const AlphabetSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p(spec);
  fill_random_distribution(p.initial(), rng);
  for (std::size_t u = 0; u < spec.n_transition_inputs; ++u) {
    for (std::size_t s = 0; s < spec.n_states; ++s) {
      fill_random_distribution(p.transition_row(u, s), rng);
    }
  }
  for (std::size_t c = 0; c < spec.n_emission_inputs; ++c) {
    for (std::size_t s = 0; s < spec.n_states; ++s) {
      fill_random_distribution(p.emission_row(c, s), rng);
    }
  }
  return p;
}

double total_log_likelihood(const ModelParams& params,
                            std::span<const SequenceData> sequences) {
  double total = 0.0;
  for (const auto& seq : sequences) {
    total += forward_scaled(params, seq).log_likelihood;
  }
  return total;
}

namespace {

/// Expected sufficient statistics accumulated over all sequences.
struct ExpectedCounts {
  explicit ExpectedCounts(const AlphabetSpec& spec)
      : initial(spec.n_states, 0.0),
        transition(spec.n_transition_inputs * spec.n_states * spec.n_states, 0.0),
        emission(spec.n_emission_inputs * spec.n_states * spec.n_outputs, 0.0) {}

  std::vector<double> initial;
  std::vector<double> transition;
  std::vector<double> emission;
  double log_likelihood = 0.0;
};

ExpectedCounts expectation_step(const ModelParams& params,
                                std::span<const SequenceData> sequences) {
  const AlphabetSpec& spec = params.spec();
  const std::size_t S = spec.n_states;
  const std::size_t Y = spec.n_outputs;
  ExpectedCounts counts(spec);
  std::vector<double> weighted(S);

  for (const auto& seq : sequences) {
    const ForwardResult fwd = forward_scaled(params, seq);
    const Lattice beta = backward_scaled(params, seq, fwd.scale);
    counts.log_likelihood += fwd.log_likelihood;
    const std::size_t T = seq.length();

    for (std::size_t t = 0; t < T; ++t) {
      // With shared scaling, alpha * beta is already normalized.
      const auto a = fwd.alpha[t];
      const auto b = beta[t];
      const std::size_t c = seq.emission_inputs[t];
      const std::size_t y = seq.outputs[t];
      for (std::size_t s = 0; s < S; ++s) {
        const double gamma = a[s] * b[s];
        if (t == 0) counts.initial[s] += gamma;
        counts.emission[(c * S + s) * Y + y] += gamma;
      }
    }

    for (std::size_t t = 0; t + 1 < T; ++t) {
      const std::size_t u = seq.transition_inputs[t];
      const std::size_t c = seq.emission_inputs[t + 1];
      const std::size_t y = seq.outputs[t + 1];
      const auto a = fwd.alpha[t];
      const auto b = beta[t + 1];
      const double inv_scale = 1.0 / fwd.scale[t + 1];
      for (std::size_t to = 0; to < S; ++to) {
        weighted[to] = params.emission(c, to, y) * b[to] * inv_scale;
      }
      double* xi = counts.transition.data() + u * S * S;
      for (std::size_t from = 0; from < S; ++from) {
        for (std::size_t to = 0; to < S; ++to) {
          xi[from * S + to] += a[from] * params.transition(u, from, to) * weighted[to];
        }
      }
    }
  }
  return counts;
}

/// Normalizes expected counts into `row`, then applies the probability floor.
/// Returns false (leaving `row` untouched) when the counts carry no mass.
bool reestimate_row(std::span<const double> expected, std::span<double> row,
                    double floor) {
  double sum = 0.0;
  for (double v : expected) sum += v;
  if (!(sum > 0.0)) return false;
  double floored_sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    row[i] = std::max(expected[i] / sum, floor);
    floored_sum += row[i];
  }
  for (double& v : row) v /= floored_sum;
  return true;
}

void maximization_step(ModelParams& params, const ExpectedCounts& counts,
                       const InputSymbolCounts& symbols, double floor) {
  const AlphabetSpec& spec = params.spec();
  const std::size_t S = spec.n_states;
  const std::size_t Y = spec.n_outputs;
  reestimate_row(counts.initial, params.initial(), floor);
  for (std::size_t u = 0; u < spec.n_transition_inputs; ++u) {
    if (symbols.transition[u] == 0) continue;
    for (std::size_t s = 0; s < S; ++s) {
      reestimate_row({counts.transition.data() + (u * S + s) * S, S},
                     params.transition_row(u, s), floor);
    }
  }
  for (std::size_t c = 0; c < spec.n_emission_inputs; ++c) {
    if (symbols.emission[c] == 0) continue;
    for (std::size_t s = 0; s < S; ++s) {
      reestimate_row({counts.emission.data() + (c * S + s) * Y, Y},
                     params.emission_row(c, s), floor);
    }
  }
}

struct RunResult {
  ModelParams params;
  std::vector<double> trace;
  bool converged = false;
};

RunResult run_em(ModelParams params, std::span<const SequenceData> sequences,
                 const FitConfig& config, const InputSymbolCounts& symbols) {
  RunResult run;
  for (std::size_t iter = 0;; ++iter) {
    ExpectedCounts counts = expectation_step(params, sequences);
    run.trace.push_back(counts.log_likelihood);
    const std::size_t n = run.trace.size();
    if (n >= 2 && run.trace[n - 1] - run.trace[n - 2] < config.tolerance) {
      run.converged = true;
      break;
    }
    if (iter == config.max_iterations) break;
    maximization_step(params, counts, symbols, config.smoothing);
  }
  run.params = std::move(params);
  return run;
}

}  // namespace

FitReport baum_welch(const AlphabetSpec& spec,
                     std::span<const SequenceData> sequences,
                     const FitConfig& config,
                     const std::optional<ModelParams>& init) {
  validate_fit_config(config);
  if (sequences.empty()) throw FitError("no sequences to fit");
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    try {
      validate_sequence(spec, sequences[i]);
    } catch (const SequenceError& e) {
      throw FitError("sequence " + std::to_string(i) +
                     " does not match the alphabet: " + e.what());
    }
  }
  if (init) {
    if (init->spec() != spec) throw FitError("initial model has a different alphabet");
    validate_params(*init);
  }

  const InputSymbolCounts symbols = count_input_symbols(spec, sequences);
  const std::size_t n_runs = init ? 1 : config.restarts;
  std::vector<RunResult> runs(n_runs);

  auto run_one = [&](std::size_t r) {
    ModelParams start = init ? *init : random_params(spec, derive_seed(config.seed, r));
    runs[r] = run_em(std::move(start), sequences, config, symbols);
  };

  std::size_t n_threads = config.threads != 0
                              ? config.threads
                              : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, n_runs);
  if (n_threads <= 1) {
    for (std::size_t r = 0; r < n_runs; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n_threads);
    {
      std::vector<std::jthread> workers;
      for (std::size_t w = 0; w < n_threads; ++w) {
        workers.emplace_back([&, w] {
          try {
            for (std::size_t r = next++; r < n_runs; r = next++) run_one(r);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  FitReport report;
  report.input_symbol_counts = symbols;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n_runs; ++r) {
    const double ll = runs[r].trace.back();
    report.restart_log_likelihoods.push_back(ll);
    if (ll > best) {
      best = ll;
      report.best_restart = r;
    }
  }
  for (auto& run : runs) report.restart_traces.push_back(run.trace);
  RunResult& winner = runs[report.best_restart];
  report.params = std::move(winner.params);
  report.log_likelihood_trace = std::move(winner.trace);
  report.converged = winner.converged;
  return report;
}

}  // namespace trustrepair::iohmm
