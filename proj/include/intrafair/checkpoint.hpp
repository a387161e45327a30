#pragma once

#include "intrafair/nn.hpp"

#include "json.hpp"

#include <filesystem>

namespace intrafair {

inline constexpr int kCheckpointFormatVersion = 1;

/// Model checkpoint document: format_version, input_width, threshold, layer
/// list (weights row-major, out x in), and prune_mask.
nlohmann::json model_to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& doc);

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace intrafair
