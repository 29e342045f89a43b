// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "json.hpp"
#include "mctse/dccrn.h"
#include "mctse/train.h"

namespace mctse::detail {

nlohmann::json to_json(const DccrnConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const LossConfig& c);

// Missing keys keep defaults; unknown keys and wrong types throw ConfigError.
DccrnConfig dccrn_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
LossConfig loss_config_from_json(const nlohmann::json& j);

}  // namespace mctse::detail
