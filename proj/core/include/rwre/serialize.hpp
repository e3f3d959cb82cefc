#pragma once

#include <nlohmann/json.hpp>

#include "rwre/branching.hpp"
#include "rwre/env_model.hpp"
#include "rwre/walk.hpp"

namespace rwre {

/// {"family":"beta","a":3,"b":1} and the other three families.
/// Throws InvalidSpec on unknown families or bad parameters.
EnvSpec env_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnvSpec& spec);

nlohmann::json to_json(const CumulantProfile& profile);
nlohmann::json to_json(const DeviationWindow& window);
nlohmann::json to_json(const HitRecord& record);
nlohmann::json to_json(const RegenSample& sample);
nlohmann::json to_json(const BlockDecomposition& blocks);

}  // namespace rwre
