#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "stencilml/model.hpp"

namespace stencilml {

inline constexpr int kCheckpointFormatVersion = 1;

/// Parameters (stored as 64-bit reals) plus a free-form manifest. The manifest always
/// carries the model configuration under "model"; callers add training provenance.
struct Checkpoint {
  ModelParams<double> params;
  nlohmann::json manifest = nlohmann::json::object();
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Layout: one line of JSON manifest, then for each tensor in declaration order a
/// little-endian record [u32 name length][name][u32 rank][u64 dims...][f64 values...].
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Rejects unknown versions, unexpected tensor names and shape mismatches.
Checkpoint load_checkpoint(std::istream& in, const std::string& source = "<stream>");
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stencilml
