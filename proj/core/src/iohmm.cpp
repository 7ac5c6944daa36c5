#include "trustrepair/iohmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "trustrepair/random.hpp"

namespace trustrepair::iohmm {

ModelParams::ModelParams(const AlphabetSpec& spec)
    : spec_(spec),
      initial_(spec.n_states, 0.0),
      transition_(spec.n_transition_inputs * spec.n_states * spec.n_states,
                  0.0),
      emission_(spec.n_emission_inputs * spec.n_states * spec.n_outputs, 0.0) {
}

ModelParams ModelParams::uniform(const AlphabetSpec& spec) {
  ModelParams p(spec);
  std::fill(p.initial_.begin(), p.initial_.end(),
            1.0 / static_cast<double>(spec.n_states));
  std::fill(p.transition_.begin(), p.transition_.end(),
            1.0 / static_cast<double>(spec.n_states));
  std::fill(p.emission_.begin(), p.emission_.end(),
            1.0 / static_cast<double>(spec.n_outputs));
  return p;
}

std::span<double> ModelParams::transition_row(std::size_t input,
                                              std::size_t from) {
  return {transition_.data() + (input * spec_.n_states + from) * spec_.n_states,
          spec_.n_states};
}

std::span<const double> ModelParams::transition_row(std::size_t input,
                                                    std::size_t from) const {
  return {transition_.data() + (input * spec_.n_states + from) * spec_.n_states,
          spec_.n_states};
}

std::span<double> ModelParams::emission_row(std::size_t input,
                                            std::size_t state) {
  return {emission_.data() + (input * spec_.n_states + state) * spec_.n_outputs,
          spec_.n_outputs};
}

std::span<const double> ModelParams::emission_row(std::size_t input,
                                                  std::size_t state) const {
  return {emission_.data() + (input * spec_.n_states + state) * spec_.n_outputs,
          spec_.n_outputs};
}

namespace {

void check_distribution(std::span<const double> row, const std::string& where) {
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double v = row[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      std::ostringstream msg;
      msg << where << ": entry " << i << " = " << v << " is outside [0, 1]";
      throw ModelError(msg.str());
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) {
    std::ostringstream msg;
    msg.precision(12);
    msg << where << ": row sums to " << sum << ", expected 1";
    throw ModelError(msg.str());
  }
}

}  // namespace

void validate_params(const ModelParams& params) {
  const AlphabetSpec& spec = params.spec();
  if (spec.n_states == 0 || spec.n_transition_inputs == 0 ||
      spec.n_emission_inputs == 0 || spec.n_outputs == 0) {
    throw ModelError("alphabet sizes must all be at least 1");
  }
  if (params.initial().size() != spec.n_states ||
      params.transition_data().size() !=
          spec.n_transition_inputs * spec.n_states * spec.n_states ||
      params.emission_data().size() !=
          spec.n_emission_inputs * spec.n_states * spec.n_outputs) {
    throw ModelError("tensor dimensions do not match the alphabet");
  }
  check_distribution(params.initial(), "initial");
  for (std::size_t u = 0; u < spec.n_transition_inputs; ++u) {
    for (std::size_t s = 0; s < spec.n_states; ++s) {
      check_distribution(params.transition_row(u, s),
                         "transition[input " + std::to_string(u) + "] row " +
                             std::to_string(s));
    }
  }
  for (std::size_t c = 0; c < spec.n_emission_inputs; ++c) {
    for (std::size_t s = 0; s < spec.n_states; ++s) {
      check_distribution(params.emission_row(c, s),
                         "emission[input " + std::to_string(c) + "] row " +
                             std::to_string(s));
    }
  }
}

namespace {

void check_symbols(std::span<const std::size_t> symbols, std::size_t bound,
                   const char* stream) {
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    if (symbols[t] >= bound) {
      std::ostringstream msg;
      msg << stream << "[" << t << "] = " << symbols[t]
          << " is outside an alphabet of size " << bound;
      throw SequenceError(msg.str());
    }
  }
}

void check_prefix_symbols(const AlphabetSpec& spec, const SequenceData& seq) {
  check_symbols(seq.outputs, spec.n_outputs, "outputs");
  check_symbols(seq.emission_inputs, spec.n_emission_inputs,
                "emission_inputs");
  check_symbols(seq.transition_inputs, spec.n_transition_inputs,
                "transition_inputs");
}

}  // namespace

void validate_sequence(const AlphabetSpec& spec, const SequenceData& seq) {
  const std::size_t T = seq.outputs.size();
  if (T == 0) throw SequenceError("sequence is empty");
  if (seq.emission_inputs.size() != T) {
    throw SequenceError("emission_inputs length " +
                        std::to_string(seq.emission_inputs.size()) +
                        " differs from outputs length " + std::to_string(T));
  }
  if (seq.transition_inputs.size() != T - 1) {
    throw SequenceError("transition_inputs length " +
                        std::to_string(seq.transition_inputs.size()) +
                        " must be one less than outputs length " +
                        std::to_string(T));
  }
  check_prefix_symbols(spec, seq);
}

namespace {

double normalize_step(std::span<double> row, std::size_t step) {
  double sum = 0.0;
  for (double v : row) sum += v;
  if (!(sum > 0.0)) {
    throw ImpossibleSequenceError(
        step, "observation at step " + std::to_string(step) +
                  " has zero probability under the model");
  }
  for (double& v : row) v /= sum;
  return sum;
}

}  // namespace

ForwardResult forward_scaled(const ModelParams& params,
                             const SequenceData& seq) {
  const AlphabetSpec& spec = params.spec();
  validate_sequence(spec, seq);
  const std::size_t T = seq.length();
  const std::size_t S = spec.n_states;

  ForwardResult result{Lattice(T, S), std::vector<double>(T, 0.0), 0.0};
  auto first = result.alpha[0];
  for (std::size_t s = 0; s < S; ++s) {
    first[s] = params.initial()[s] *
               params.emission(seq.emission_inputs[0], s, seq.outputs[0]);
  }
  result.scale[0] = normalize_step(first, 0);
  result.log_likelihood = std::log(result.scale[0]);

  for (std::size_t t = 1; t < T; ++t) {
    const auto prev = std::as_const(result.alpha)[t - 1];
    auto cur = result.alpha[t];
    const std::size_t u = seq.transition_inputs[t - 1];
    const std::size_t c = seq.emission_inputs[t];
    const std::size_t y = seq.outputs[t];
    for (std::size_t to = 0; to < S; ++to) {
      double acc = 0.0;
      for (std::size_t from = 0; from < S; ++from) {
        acc += prev[from] * params.transition(u, from, to);
      }
      cur[to] = acc * params.emission(c, to, y);
    }
    result.scale[t] = normalize_step(cur, t);
    result.log_likelihood += std::log(result.scale[t]);
  }
  return result;
}

Lattice backward_scaled(const ModelParams& params, const SequenceData& seq,
                        std::span<const double> scale) {
  const AlphabetSpec& spec = params.spec();
  validate_sequence(spec, seq);
  const std::size_t T = seq.length();
  const std::size_t S = spec.n_states;
  if (scale.size() != T) {
    throw SequenceError("scale factor count does not match sequence length");
  }

  Lattice beta(T, S);
  std::fill(beta[T - 1].begin(), beta[T - 1].end(), 1.0);
  std::vector<double> weighted(S);
  for (std::size_t t = T - 1; t-- > 0;) {
    const std::size_t u = seq.transition_inputs[t];
    const std::size_t c = seq.emission_inputs[t + 1];
    const std::size_t y = seq.outputs[t + 1];
    if (!(scale[t + 1] > 0.0)) {
      throw ImpossibleSequenceError(
          t + 1, "zero scale factor at step " + std::to_string(t + 1));
    }
    const auto next = std::as_const(beta)[t + 1];
    for (std::size_t to = 0; to < S; ++to) {
      weighted[to] = params.emission(c, to, y) * next[to];
    }
    auto cur = beta[t];
    for (std::size_t from = 0; from < S; ++from) {
      double acc = 0.0;
      for (std::size_t to = 0; to < S; ++to) {
        acc += params.transition(u, from, to) * weighted[to];
      }
      cur[from] = acc / scale[t + 1];
    }
  }
  return beta;
}

Lattice smoothing_posteriors(const Lattice& alpha, const Lattice& beta) {
  Lattice gamma(alpha.steps(), alpha.states());
  for (std::size_t t = 0; t < alpha.steps(); ++t) {
    auto g = gamma[t];
    double sum = 0.0;
    for (std::size_t s = 0; s < alpha.states(); ++s) {
      g[s] = alpha[t][s] * beta[t][s];
      sum += g[s];
    }
    for (double& v : g) v /= sum;
  }
  return gamma;
}

Belief condition_on_output(const ModelParams& params,
                           std::span<const double> belief,
                           std::size_t emission_input, std::size_t output,
                           std::size_t step) {
  Belief post(belief.begin(), belief.end());
  for (std::size_t s = 0; s < post.size(); ++s) {
    post[s] *= params.emission(emission_input, s, output);
  }
  normalize_step(post, step);
  return post;
}

Belief propagate(const ModelParams& params, std::span<const double> posterior,
                 std::size_t transition_input) {
  const std::size_t S = params.spec().n_states;
  Belief next(S, 0.0);
  for (std::size_t from = 0; from < S; ++from) {
    const auto row = params.transition_row(transition_input, from);
    for (std::size_t to = 0; to < S; ++to) next[to] += posterior[from] * row[to];
  }
  return next;
}

std::vector<Belief> filter_predictive(const ModelParams& params,
                                      const SequenceData& prefix) {
  const AlphabetSpec& spec = params.spec();
  const std::size_t T = prefix.outputs.size();
  if (prefix.emission_inputs.size() != T) {
    throw SequenceError("emission_inputs and outputs differ in length");
  }
  const std::size_t n_moves = prefix.transition_inputs.size();
  if (n_moves > T || (T > 0 && n_moves + 1 < T)) {
    throw SequenceError(
        "filter prefix needs T-1 or T transition inputs for T outputs");
  }
  check_prefix_symbols(spec, prefix);

  std::vector<Belief> beliefs;
  beliefs.reserve(n_moves + 1);
  beliefs.emplace_back(params.initial().begin(), params.initial().end());
  for (std::size_t t = 0; t < n_moves; ++t) {
    const Belief post = condition_on_output(
        params, beliefs.back(), prefix.emission_inputs[t], prefix.outputs[t], t);
    beliefs.push_back(propagate(params, post, prefix.transition_inputs[t]));
  }
  return beliefs;
}

SampledSequence sample_sequence(const ModelParams& params,
                                std::span<const std::size_t> emission_inputs,
                                std::span<const std::size_t> transition_inputs,
                                std::uint64_t seed) {
  validate_params(params);
  const AlphabetSpec& spec = params.spec();
  const std::size_t T = emission_inputs.size();
  if (T == 0) throw SequenceError("cannot sample an empty sequence");
  if (transition_inputs.size() + 1 != T) {
    throw SequenceError("transition_inputs must be one shorter than emission_inputs");
  }
  check_symbols(emission_inputs, spec.n_emission_inputs, "emission_inputs");
  check_symbols(transition_inputs, spec.n_transition_inputs,
                "transition_inputs");

  Rng rng(seed);
  SampledSequence out;
  out.hidden_states.reserve(T);
  out.outputs.reserve(T);
  std::size_t state = rng.categorical(params.initial());
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      state = rng.categorical(params.transition_row(transition_inputs[t - 1], state));
    }
    out.hidden_states.push_back(state);
    out.outputs.push_back(
        rng.categorical(params.emission_row(emission_inputs[t], state)));
  }
  return out;
}

ModelParams permute_states(const ModelParams& params,
                           std::span<const std::size_t> permutation) {
  const AlphabetSpec& spec = params.spec();
  const std::size_t S = spec.n_states;
  if (permutation.size() != S) {
    throw ModelError("permutation length differs from the number of states");
  }
  ModelParams out(spec);
  for (std::size_t i = 0; i < S; ++i) {
    out.initial()[i] = params.initial()[permutation[i]];
  }
  for (std::size_t u = 0; u < spec.n_transition_inputs; ++u) {
    for (std::size_t i = 0; i < S; ++i) {
      auto row = out.transition_row(u, i);
      for (std::size_t j = 0; j < S; ++j) {
        row[j] = params.transition(u, permutation[i], permutation[j]);
      }
    }
  }
  for (std::size_t c = 0; c < spec.n_emission_inputs; ++c) {
    for (std::size_t i = 0; i < S; ++i) {
      const auto src = params.emission_row(c, permutation[i]);
      std::copy(src.begin(), src.end(), out.emission_row(c, i).begin());
    }
  }
  return out;
}

CanonicalStates canonicalize_states(const ModelParams& params,
                                    const OrderingRule& rule) {
  validate_params(params);
  const AlphabetSpec& spec = params.spec();
  if (rule.emission_input >= spec.n_emission_inputs ||
      rule.output >= spec.n_outputs) {
    throw ModelError("ordering rule refers to a symbol outside the alphabet");
  }
  const std::size_t S = spec.n_states;
  std::vector<double> key(S);
  for (std::size_t s = 0; s < S; ++s) {
    key[s] = params.emission(rule.emission_input, s, rule.output);
  }

  CanonicalStates out;
  out.permutation.resize(S);
  std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});

  constexpr double kTieTolerance = 1e-12;
  for (std::size_t a = 0; a < S && !out.tie; ++a) {
    for (std::size_t b = a + 1; b < S; ++b) {
      if (std::abs(key[a] - key[b]) <= kTieTolerance) {
        out.tie = true;
        break;
      }
    }
  }
  if (!out.tie) {
    std::stable_sort(out.permutation.begin(), out.permutation.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  }
  out.params = permute_states(params, out.permutation);
  return out;
}

}  // namespace trustrepair::iohmm
