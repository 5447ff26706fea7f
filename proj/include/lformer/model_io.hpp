#pragma once

#include <cstdint>
#include <string>

#include "lformer/model.hpp"
#include "lformer/train.hpp"

// Checkpoints: one .lftk container per named parameter plus a manifest with
// the model configuration, step counter and optimizer-state file list.

namespace lformer::io {

struct Checkpoint {
    model::LFormerModel<float> model;
    train::AdamState<float> adam;
    bool has_adam = false;
    std::int64_t step = 0;
};

void save_checkpoint(const std::string& dir, const model::LFormerModel<float>& m,
                     const train::AdamState<float>* adam, std::int64_t step);

Checkpoint load_checkpoint(const std::string& dir);

// Serialization of the model config as manifest lines (shared with RunConfig).
std::string config_to_lines(const model::LFormerConfig& c);
bool apply_config_line(model::LFormerConfig& c, const std::string& key, const std::string& value);

}  // namespace lformer::io
