#pragma once

#include "ed2/nn/tensor.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace ed2::nn {

// {"spec": <spec>, "tensors": [{"name", "shape", "values"}, ...]}
// Doubles are written in shortest round-trip form, so a reload is bit-exact.
std::string checkpoint_to_string(const nlohmann::json& spec, const ParamSet& params);
nlohmann::json checkpoint_to_json(const nlohmann::json& spec, const ParamSet& params);

// Returns the tensors; `spec_out` (optional) receives the embedded spec block.
ParamSet checkpoint_from_json(const nlohmann::json& doc, nlohmann::json* spec_out = nullptr);

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& spec, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path, nlohmann::json* spec_out = nullptr);

}  // namespace ed2::nn
