#pragma once

#include <string>
#include <vector>

#include "aqp/model.hpp"
#include "aqp/rewards.hpp"

namespace aqp {

enum class SftLoss { kMse, kSmoothL1 };
enum class LrSchedule { kConstant, kCosine };

struct SftConfig {
    double lr = 5e-5;
    int epochs = 4;
    int batch = 8;
    int grad_accum = 1;
    SftLoss loss = SftLoss::kSmoothL1;
};

struct RlConfig {
    double lr = 1e-6;
    int epochs = 1;
    int group_size = 8;
    double kl_beta = 0.04;
    double max_grad_norm = 5.0;
    LrSchedule lr_schedule = LrSchedule::kCosine;
    int clips_per_epoch = 0;  // 0 = full training split
};

struct TrainConfig {
    SftConfig sft;
    RlConfig rl;
    uint64_t seed = 0;
    double val_fraction = 0.1;
};

void validate_train_config(const TrainConfig& cfg);

// Regression loss for one micro-batch, scaled by 1/grad_accum and accumulated
// into the parameter gradients. The caller applies the optimizer every
// grad_accum micro-batches. Returns the unscaled pre-update loss.
double sft_step(const std::vector<UnifiedClip>& batch, Model& model, const SftConfig& cfg);

// A_i = (r_i - mean) / (population std + 1e-8).
std::vector<double> grpo_advantages(const std::vector<double>& rewards);

// KL(N(mu, diag sigma^2) || N(mu_ref, diag sigma_ref^2)), closed form.
double gaussian_kl(const std::vector<double>& mu, const std::vector<double>& log_std,
                   const std::vector<double>& mu_ref,
                   const std::vector<double>& log_std_ref);

struct GrpoStats {
    double mean_reward = 0.0;
    double mean_advantage = 0.0;
    double kl = 0.0;
    double grad_norm = 0.0;
    double loss = 0.0;
};

// One GRPO update on a single clip: sample G trajectories around the current
// prediction, score with r_total, maximize sum_i A_i log pi(traj_i) minus
// kl_beta * KL(pi || pi_ref). The optimizer step is the caller's.
GrpoStats grpo_step(const UnifiedClip& clip, Model& model, const Model& ref_model,
                    const RlConfig& cfg, const RewardConfig& rcfg, uint64_t sample_seed);

struct EpochMetrics {
    std::string stage;
    int epoch = 0;
    double train_loss = 0.0;
    double val_avg_l2 = 0.0;
    double val_mean_r_total = 0.0;
};

struct PipelineResult {
    std::vector<EpochMetrics> epochs;
    double untrained_val_avg_l2 = 0.0;
    std::string post_sft_path;
    std::string post_rl_path;
    std::string metrics_path;
};

// Mean open-loop avg-L2 and mean r_total over a clip set.
std::pair<double, double> validate_model(const Model& model,
                                         const std::vector<UnifiedClip>& clips,
                                         const RewardConfig& rcfg);

enum class TrainStage { kSft, kRl, kBoth };

// SFT epochs then GRPO epochs; writes post_sft/post_rl checkpoints and a
// JSONL metrics log under out_dir. Bitwise reproducible per seed.
PipelineResult train_pipeline(const std::vector<UnifiedClip>& corpus,
                              const ModelConfig& mcfg, const TrainConfig& tcfg,
                              const RewardConfig& rcfg, const std::string& out_dir,
                              TrainStage stage = TrainStage::kBoth);

}  // namespace aqp
