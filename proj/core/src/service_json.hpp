#pragma once

#include <json.hpp>

#include "trustrepair/experiment_service.hpp"

namespace trustrepair::service::detail {

nlohmann::ordered_json env_to_json(const EnvConfig& env);

/// Overlays the fields present in `j` on `base`.
EnvConfig env_from_json(const nlohmann::json& j, EnvConfig base);

nlohmann::ordered_json request_to_json(const SessionRequest& request);
SessionRequest request_from_json(const nlohmann::json& j, SessionRequest base);

}  // namespace trustrepair::service::detail
