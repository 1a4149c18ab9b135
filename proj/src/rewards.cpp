#include "aqp/rewards.hpp"

#include <cmath>

namespace aqp {

namespace {
constexpr double kDegenerateEps = 1e-9;
}

void validate_reward_config(const RewardConfig& cfg) {
    if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) {
        throw contract_error("reward config: gamma must lie in (0, 1]");
    }
    if (cfg.theta1 < 0.0 || cfg.theta2 < 0.0 || cfg.theta3 < 0.0) {
        throw contract_error("reward config: theta weights must be >= 0");
    }
    if (cfg.theta1 + cfg.theta2 + cfg.theta3 <= 0.0) {
        throw contract_error("reward config: theta weights must sum to a positive number");
    }
    if (cfg.steer_ratio_limit <= 0.0) {
        throw contract_error("reward config: steer_ratio_limit must be > 0");
    }
    if (cfg.acc_limit <= 0.0) throw contract_error("reward config: acc_limit must be > 0");
    if (cfg.dt <= 0.0) throw contract_error("reward config: dt must be > 0");
}

double r_traj(const Traj& pred, const Traj& gt, const RewardConfig& cfg) {
    if (pred.size() != gt.size()) throw contract_error("r_traj: pred/gt shape mismatch");
    if (pred.empty()) throw contract_error("r_traj: H must be >= 1");
    double acc = 0.0;
    double g = 1.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        g *= cfg.gamma;  // exponent starts at i = 1
        double dx = pred[i][0] - gt[i][0];
        double dy = pred[i][1] - gt[i][1];
        acc += g * (cfg.alpha * dx * dx + cfg.beta * dy * dy);
    }
    acc /= static_cast<double>(pred.size());
    if (cfg.clip_traj) acc = std::min(cfg.traj_reward_offset, acc);
    return cfg.traj_reward_offset - acc;
}

double r_steer(const Traj& pred, const RewardConfig& cfg) {
    if (pred.size() < 2) throw contract_error("r_steer: H must be >= 2");
    double score = 0.0;
    for (size_t i = 1; i < pred.size(); ++i) {
        double dx = pred[i][0] - pred[i - 1][0];
        double dy = pred[i][1] - pred[i - 1][1];
        if (std::fabs(dx) < kDegenerateEps) {
            // Eq. 2 divides unguarded; stationary segments are fine, lateral
            // jumps are not.
            score += std::fabs(dy) < kDegenerateEps ? 1.0 : 0.0;
        } else {
            score += std::fabs(dy / dx) < cfg.steer_ratio_limit ? 1.0 : 0.0;
        }
    }
    return score / static_cast<double>(pred.size() - 1);
}

std::vector<double> acc_seq(const Traj& pred, const RewardConfig& cfg) {
    if (pred.size() < 3) throw contract_error("acc_seq: H must be >= 3");
    std::vector<double> out;
    out.reserve(pred.size() - 2);
    for (size_t j = 1; j + 1 < pred.size(); ++j) {
        double ahead = std::hypot(pred[j + 1][0] - pred[j][0], pred[j + 1][1] - pred[j][1]);
        double behind = std::hypot(pred[j][0] - pred[j - 1][0], pred[j][1] - pred[j - 1][1]);
        out.push_back((ahead - behind) / (cfg.dt * cfg.dt));
    }
    return out;
}

double r_acc(const Traj& pred, const RewardConfig& cfg) {
    std::vector<double> accs = acc_seq(pred, cfg);
    double score = 0.0;
    for (double a : accs) score += std::fabs(a) < cfg.acc_limit ? 1.0 : 0.0;
    return score / static_cast<double>(accs.size());
}

double r_total(const Traj& pred, const Traj& gt, const RewardConfig& cfg) {
    return cfg.theta1 * r_traj(pred, gt, cfg) + cfg.theta2 * r_steer(pred, cfg) +
           cfg.theta3 * r_acc(pred, cfg);
}

}  // namespace aqp
