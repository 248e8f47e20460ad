#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "dfcn/models.hpp"

namespace dfcn {

// JSON container: format tag, spec (kind, IMP, lambda, layer dims, activation
// tags, seed, ...), normalizer statistics, weights or forest nodes, and the
// training log. Doubles are written in shortest round-trip form, so saving
// the same model twice gives identical bytes.
nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace dfcn
