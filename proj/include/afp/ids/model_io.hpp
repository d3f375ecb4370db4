#pragma once

#include <filesystem>

#include <json.hpp>

#include "afp/ids/forest.hpp"

namespace afp::ids {

inline constexpr int kModelFormatVersion = 1;

/// {"format":"afp-forest","version":1,"schema_hash":...,"schema":{...},
///  "hyper":{...},"trees":[{"feature":[],"threshold":[],"left":[],"right":[],
///  "counts":[[benign,attack],...]}]}
nlohmann::json model_to_json(const ClassifierModel& model);

/// Throws Error{schema} on a format/version/hash mismatch and
/// Error{training} when the tree arrays are inconsistent.
ClassifierModel model_from_json(const nlohmann::json& doc);

void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

nlohmann::json hyper_to_json(const ForestHyper& h);
ForestHyper hyper_from_json(const nlohmann::json& j);

nlohmann::json schema_to_json(const FeatureSchema& s);
FeatureSchema schema_from_json(const nlohmann::json& j);

}  // namespace afp::ids
