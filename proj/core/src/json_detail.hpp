#pragma once

#include <json.hpp>

#include "trustrepair/iohmm.hpp"

namespace trustrepair::detail {

nlohmann::ordered_json params_json(const iohmm::ModelParams& params);

}  // namespace trustrepair::detail
