#pragma once

// JSON encoding of model parameters:
//
//   {"schema": "trustrepair.model/1",
//    "alphabet": {"n_states": 2, "n_transition_inputs": 6, ...},
//    "initial": [...],
//    "transition": [[[...]]],   // input x from-state x to-state
//    "emission": [[[...]]]}     // input x state x output

#include <filesystem>
#include <string>

#include "trustrepair/iohmm.hpp"

namespace trustrepair {

inline constexpr const char* kModelSchema = "trustrepair.model/1";

std::string params_to_json(const iohmm::ModelParams& params, int indent = 2);

/// Accepts a bare model object or any object with a "params" member holding
/// one (such as a fit report). Validates the result.
iohmm::ModelParams params_from_json(const std::string& text);

iohmm::ModelParams read_params_file(const std::filesystem::path& path);

}  // namespace trustrepair
