#pragma once

#include <string>

#include <json.hpp>

#include "leadnet/frontend.hpp"
#include "leadnet/model.hpp"
#include "leadnet/train.hpp"

namespace leadnet {

std::string to_string(Scheme s);
std::string to_string(Variant v);
Scheme scheme_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

void to_json(nlohmann::json& j, const MelConfig& c);
void from_json(const nlohmann::json& j, MelConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace leadnet
