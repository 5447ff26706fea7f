#pragma once

#include <string>

#include "lformer/model.hpp"
#include "lformer/train.hpp"

// Flat key=value run configuration. Unknown keys are rejected; every key has a
// default (listed in the README) so an empty file is a valid config.

namespace lformer::config {

struct RunConfig {
    model::LFormerConfig model;
    train::AdamConfig adam;
    double alpha = 0.1;
    std::size_t batch = 32;
    std::int64_t steps = 300;
    std::int64_t decay_steps = 0;
    double decay_factor = 0.1;
    std::int64_t checkpoint_every = 100;
    int workers = 1;

    train::TrainOptions train_options() const {
        train::TrainOptions opt;
        opt.adam = adam;
        opt.alpha = alpha;
        opt.batch = batch;
        opt.steps = steps;
        opt.decay_steps = decay_steps;
        opt.decay_factor = decay_factor;
        opt.checkpoint_every = checkpoint_every;
        opt.workers = workers;
        opt.seed = model.seed;
        return opt;
    }
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_string(const RunConfig& c);

}  // namespace lformer::config
