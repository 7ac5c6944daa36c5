#include "trustrepair/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "json_detail.hpp"

namespace trustrepair {

using nlohmann::json;

namespace detail {

nlohmann::ordered_json params_json(const iohmm::ModelParams& params) {
  const auto& spec = params.spec();
  nlohmann::ordered_json j;
  j["schema"] = kModelSchema;
  j["alphabet"] = {{"n_states", spec.n_states},
                   {"n_transition_inputs", spec.n_transition_inputs},
                   {"n_emission_inputs", spec.n_emission_inputs},
                   {"n_outputs", spec.n_outputs}};
  j["initial"] = std::vector<double>(params.initial().begin(), params.initial().end());
  auto transition = nlohmann::ordered_json::array();
  for (std::size_t u = 0; u < spec.n_transition_inputs; ++u) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < spec.n_states; ++s) {
      const auto row = params.transition_row(u, s);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    transition.push_back(std::move(rows));
  }
  j["transition"] = std::move(transition);
  auto emission = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < spec.n_emission_inputs; ++c) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < spec.n_states; ++s) {
      const auto row = params.emission_row(c, s);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    emission.push_back(std::move(rows));
  }
  j["emission"] = std::move(emission);
  return j;
}

}  // namespace detail

std::string params_to_json(const iohmm::ModelParams& params, int indent) {
  return detail::params_json(params).dump(indent);
}

namespace {

void copy_row(const json& src, std::span<double> dst, const std::string& where) {
  if (!src.is_array() || src.size() != dst.size()) {
    throw iohmm::ModelError(where + " has the wrong length");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i].get<double>();
}

iohmm::ModelParams decode(const json& j) {
  const json& a = j.at("alphabet");
  const iohmm::AlphabetSpec spec{a.at("n_states").get<std::size_t>(),
                                 a.at("n_transition_inputs").get<std::size_t>(),
                                 a.at("n_emission_inputs").get<std::size_t>(),
                                 a.at("n_outputs").get<std::size_t>()};
  iohmm::ModelParams params(spec);
  copy_row(j.at("initial"), params.initial(), "initial");
  const json& transition = j.at("transition");
  const json& emission = j.at("emission");
  if (transition.size() != spec.n_transition_inputs || emission.size() != spec.n_emission_inputs) {
    throw iohmm::ModelError("tensor dimensions do not match the alphabet");
  }
  for (std::size_t u = 0; u < spec.n_transition_inputs; ++u) {
    if (transition[u].size() != spec.n_states) throw iohmm::ModelError("transition tensor is ragged");
    for (std::size_t s = 0; s < spec.n_states; ++s) {
      copy_row(transition[u][s], params.transition_row(u, s),
               "transition[" + std::to_string(u) + "][" + std::to_string(s) + "]");
    }
  }
  for (std::size_t c = 0; c < spec.n_emission_inputs; ++c) {
    if (emission[c].size() != spec.n_states) throw iohmm::ModelError("emission tensor is ragged");
    for (std::size_t s = 0; s < spec.n_states; ++s) {
      copy_row(emission[c][s], params.emission_row(c, s),
               "emission[" + std::to_string(c) + "][" + std::to_string(s) + "]");
    }
  }
  iohmm::validate_params(params);
  return params;
}

}  // namespace

iohmm::ModelParams params_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.contains("params") && j["params"].is_object()) return decode(j["params"]);
    return decode(j);
  } catch (const json::exception& e) {
    throw iohmm::ModelError(std::string("malformed model file: ") + e.what());
  }
}

iohmm::ModelParams read_params_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return params_from_json(buf.str());
}

}  // namespace trustrepair
