#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "leaf/predictor.hpp"
#include "leaf/tensor.hpp"

namespace leaf {

// Self-describing binary tensor container. Layout: magic "LEAF1", then one
// record per tensor: u32 name length, name bytes, u32 rank, u64 dims,
// little-endian f64 payload. Records run to end of file.
void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path);

// Parameter checkpoint for both branches; config JSON is written alongside
// as <path>.json.
void save_checkpoint(const std::string& path, PredictorParams& params,
                     const nlohmann::json& config);
// Loads by parameter name; missing names or shape mismatches are errors.
void load_checkpoint(const std::string& path, PredictorParams& params);

}  // namespace leaf
