#pragma once

#include <iosfwd>
#include <string>

#include "clvsa/model.hpp"

namespace clvsa::train {

// Versioned textual checkpoint: a header line, the model configuration as
// one JSON line, then one record per named tensor with its shape and values
// in hexfloat so a save/load round trip is bit exact.
void save_checkpoint(std::ostream& out, const model::ModelConfig& cfg,
                     const model::ParamStore& params);
void save_checkpoint_file(const std::string& path,
                          const model::ModelConfig& cfg,
                          const model::ParamStore& params);

struct Checkpoint {
  model::ModelConfig config;
  model::ParamStore params;
};

Checkpoint load_checkpoint(std::istream& in, const std::string& name);
Checkpoint load_checkpoint_file(const std::string& path);

// JSON round trip for the model configuration (also used by the CLI)
std::string model_config_to_json(const model::ModelConfig& cfg);
model::ModelConfig model_config_from_json(const std::string& json);

}  // namespace clvsa::train
