#pragma once

#include <memory>
#include <string>

#include "aqp/model.hpp"

namespace aqp {

// Versioned single-file container: magic + JSON header (model config,
// trajectory stats, parameter manifest, free-form stage tag) + raw float64
// parameter blob in registration order.

void save_checkpoint(const std::string& path, const Model& model,
                     const TrajectoryStats& stats, const std::string& stage);

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    TrajectoryStats stats;
    std::string stage;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace aqp
