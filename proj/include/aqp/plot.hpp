#pragma once

#include <string>
#include <vector>

#include "aqp/evaluation.hpp"

namespace aqp {

// BEV trajectory plot: predicted path, ground-truth path, optional obstacle
// boxes. x points right, y up; auto-scaled to the content.
void write_trajectory_svg(const std::string& path, const Traj& pred, const Traj& gt,
                          const std::vector<ObstacleBox>& boxes = {});

void write_rollout_svg(const std::string& path, const RolloutTrace& trace,
                       const ObstacleBox& adversary);

}  // namespace aqp
