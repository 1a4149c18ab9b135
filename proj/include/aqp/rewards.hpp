#pragma once

#include <array>
#include <vector>

#include "aqp/errors.hpp"

namespace aqp {

struct RewardConfig {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.95;              // per-step discount, exponent starts at 1
    double theta1 = 0.8;              // trajectory weight
    double theta2 = 0.1;              // steering weight
    double theta3 = 0.1;              // acceleration weight
    double steer_ratio_limit = 0.84;  // lateral/longitudinal slope bound, ~40 deg
    double acc_limit = 6.0;           // m/s^2 (~0.6 g)
    double dt = 0.5;                  // seconds per step
    bool clip_traj = false;
    double traj_reward_offset = 1.0;  // leading constant of the trajectory reward
};

// Throws contract_error with the offending field name on invalid values.
void validate_reward_config(const RewardConfig& cfg);

using Traj = std::vector<std::array<double, 2>>;

// offset - (1/H) sum_i gamma^i (alpha dx_i^2 + beta dy_i^2); the clipped
// variant floors at 0 via offset - min(offset, .).
double r_traj(const Traj& pred, const Traj& gt, const RewardConfig& cfg);

// Mean indicator(|dy/dx| < limit) over the H-1 consecutive segments. The
// ">=" branch scores 0. Degenerate |dx| < 1e-9 segments score 1 when
// stationary (|dy| < 1e-9 too), else 0.
double r_steer(const Traj& pred, const RewardConfig& cfg);

// acc_j = (|p_{j+1}-p_j| - |p_j-p_{j-1}|) / dt^2, H-2 values.
std::vector<double> acc_seq(const Traj& pred, const RewardConfig& cfg);

// Mean indicator(|acc| < acc_limit); ">=" scores 0.
double r_acc(const Traj& pred, const RewardConfig& cfg);

// theta1 * r_traj + theta2 * r_steer + theta3 * r_acc.
double r_total(const Traj& pred, const Traj& gt, const RewardConfig& cfg);

}  // namespace aqp
