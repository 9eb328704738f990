#pragma once

#include <string>

#include "gorl/scheduler.hpp"

#include "json.hpp"

namespace gorl {

// Checkpoints carry everything needed to decode, evaluate, analyze and
// continue staged studies: parameters, normalizer, RNG counters, step and
// stage bookkeeping, plus the effective config echo.
nlohmann::json checkpoint_to_json(const TrainState& state);
TrainState checkpoint_from_json(const nlohmann::json& image);

void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& image);

}  // namespace gorl
