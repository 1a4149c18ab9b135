#include "aqp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "aqp/checkpoint.hpp"
#include "aqp/evaluation.hpp"
#include "aqp/optim.hpp"

namespace aqp {

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.sft.lr <= 0.0 || cfg.rl.lr <= 0.0) {
        throw contract_error("train config: learning rates must be > 0");
    }
    if (cfg.sft.epochs < 0 || cfg.rl.epochs < 0) {
        throw contract_error("train config: epochs must be >= 0");
    }
    if (cfg.sft.batch < 1 || cfg.sft.grad_accum < 1) {
        throw contract_error("train config: sft batch/grad_accum must be >= 1");
    }
    if (cfg.rl.group_size < 2) throw contract_error("train config: group_size must be >= 2");
    if (cfg.rl.kl_beta < 0.0) throw contract_error("train config: kl_beta must be >= 0");
    if (cfg.rl.max_grad_norm <= 0.0) {
        throw contract_error("train config: max_grad_norm must be > 0");
    }
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
        throw contract_error("train config: val_fraction must lie in (0, 1)");
    }
}

namespace {

Tensor actions_column(const UnifiedClip& clip) {
    std::vector<double> flat;
    flat.reserve(clip.actions.size() * 2);
    for (const auto& w : clip.actions) {
        flat.push_back(w[0]);
        flat.push_back(w[1]);
    }
    int rows = static_cast<int>(flat.size());
    return Tensor::from({rows, 1}, std::move(flat));
}

}  // namespace

double sft_step(const std::vector<UnifiedClip>& batch, Model& model, const SftConfig& cfg) {
    if (batch.empty()) throw contract_error("sft_step: empty batch");
    Tensor total;
    for (const auto& clip : batch) {
        TrajectoryPrediction pred = model.predict(clip);
        Tensor target = actions_column(clip);
        Tensor loss = cfg.loss == SftLoss::kMse ? mse_loss(pred.waypoints_t, target)
                                                : smooth_l1_loss(pred.waypoints_t, target);
        total = total.valid() ? add(total, loss) : loss;
    }
    Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
    double value = loss.value();
    if (!std::isfinite(value)) {
        throw numeric_error("sft_step: non-finite loss on batch starting at clip " +
                            batch.front().clip_id);
    }
    backward(scale(loss, 1.0 / static_cast<double>(cfg.grad_accum)));
    return value;
}

std::vector<double> grpo_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) throw contract_error("grpo_advantages: need G >= 2");
    double n = static_cast<double>(rewards.size());
    double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    double std_dev = std::sqrt(var / n);  // population std
    std::vector<double> out(rewards.size());
    for (size_t i = 0; i < rewards.size(); ++i) {
        out[i] = (rewards[i] - mean) / (std_dev + 1e-8);
    }
    return out;
}

double gaussian_kl(const std::vector<double>& mu, const std::vector<double>& log_std,
                   const std::vector<double>& mu_ref,
                   const std::vector<double>& log_std_ref) {
    if (mu.size() != log_std.size() || mu.size() != mu_ref.size() ||
        mu.size() != log_std_ref.size()) {
        throw shape_error("gaussian_kl: size mismatch");
    }
    double kl = 0.0;
    for (size_t i = 0; i < mu.size(); ++i) {
        double dmu = mu[i] - mu_ref[i];
        double var = std::exp(2.0 * log_std[i]);
        double var_ref = std::exp(2.0 * log_std_ref[i]);
        kl += log_std_ref[i] - log_std[i] + (var + dmu * dmu) / (2.0 * var_ref) - 0.5;
    }
    return kl;
}

GrpoStats grpo_step(const UnifiedClip& clip, Model& model, const Model& ref_model,
                    const RlConfig& cfg, const RewardConfig& rcfg, uint64_t sample_seed) {
    // Current policy forward (on the graph) and the frozen reference forward.
    TrajectoryPrediction pred = model.predict(clip);
    Tensor mu = pred.waypoints_t;                       // (H*N) x 1
    Tensor ls = model.decoder().clamped_log_std();      // (H*N) x 1
    std::vector<double> ls_vals = model.decoder().clamped_log_std_values();

    std::vector<double> mu_ref, ls_ref;
    {
        NoGradGuard ng;
        TrajectoryPrediction rp = ref_model.predict(clip);
        mu_ref = rp.waypoints_t.data();
        ls_ref = ref_model.decoder().clamped_log_std_values();
    }

    PolicySample samples = policy_sample(pred.waypoints, ls_vals, cfg.group_size,
                                         Rng::mix(sample_seed, clip.clip_id));
    std::vector<double> rewards(samples.trajectories.size());
    for (size_t g = 0; g < samples.trajectories.size(); ++g) {
        const auto& flat = samples.trajectories[g];
        Traj traj(flat.size() / 2);
        for (size_t i = 0; i < traj.size(); ++i) traj[i] = {flat[2 * i], flat[2 * i + 1]};
        rewards[g] = r_total(traj, clip.actions, rcfg);
        if (!std::isfinite(rewards[g])) {
            throw numeric_error("grpo_step: non-finite reward on clip " + clip.clip_id);
        }
    }
    std::vector<double> advantages = grpo_advantages(rewards);

    // -(1/G) sum_i A_i log pi(x_i); log pi = sum_d -0.5 z^2 - log_std + const.
    // The additive constant has zero gradient and is dropped.
    Tensor inv_std = exp_op(scale(ls, -1.0));
    Tensor pg_loss;
    int dims = mu.rows();
    for (size_t g = 0; g < samples.trajectories.size(); ++g) {
        Tensor x = Tensor::from({dims, 1}, samples.trajectories[g]);
        Tensor z = mul(sub(x, mu), inv_std);
        Tensor logp = sum(sub(scale(mul(z, z), -0.5), ls));
        Tensor term = scale(logp, -advantages[g] / static_cast<double>(cfg.group_size));
        pg_loss = pg_loss.valid() ? add(pg_loss, term) : term;
    }

    // Closed-form KL(pi || pi_ref) between the diagonal Gaussians, kept on the
    // graph through mu and log_std.
    Tensor mu_ref_t = Tensor::from({dims, 1}, mu_ref);
    Tensor ls_ref_t = Tensor::from({dims, 1}, ls_ref);
    std::vector<double> inv_var_ref(ls_ref.size());
    for (size_t i = 0; i < ls_ref.size(); ++i) inv_var_ref[i] = std::exp(-2.0 * ls_ref[i]);
    Tensor inv_var_ref_t = Tensor::from({dims, 1}, inv_var_ref);
    Tensor dmu = sub(mu, mu_ref_t);
    Tensor kl_terms = add(sub(ls_ref_t, ls),
                          add_const(scale(mul(add(exp_op(scale(ls, 2.0)), mul(dmu, dmu)),
                                               inv_var_ref_t),
                                          0.5),
                                    -0.5));
    Tensor kl = sum(kl_terms);
    double kl_value = kl.value();
    if (!std::isfinite(kl_value)) {
        throw numeric_error("grpo_step: non-finite KL on clip " + clip.clip_id);
    }

    Tensor loss = add(pg_loss, scale(kl, cfg.kl_beta));
    backward(loss);

    GrpoStats stats;
    stats.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                        static_cast<double>(rewards.size());
    stats.mean_advantage = std::accumulate(advantages.begin(), advantages.end(), 0.0) /
                           static_cast<double>(advantages.size());
    stats.kl = kl_value;
    stats.loss = loss.value();
    return stats;
}

std::pair<double, double> validate_model(const Model& model,
                                         const std::vector<UnifiedClip>& clips,
                                         const RewardConfig& rcfg) {
    if (clips.empty()) throw contract_error("validate_model: empty clip set");
    NoGradGuard ng;
    double l2 = 0.0, rt = 0.0;
    for (const auto& clip : clips) {
        TrajectoryPrediction pred = model.predict(clip);
        l2 += l2_at_horizons(pred.waypoints, clip.actions, rcfg.dt).avg;
        rt += r_total(pred.waypoints, clip.actions, rcfg);
    }
    double n = static_cast<double>(clips.size());
    return {l2 / n, rt / n};
}

namespace {

void log_metric_line(std::ofstream& out, const EpochMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "{\"stage\":\"%s\",\"epoch\":%d,\"train_loss\":%.17g,"
                  "\"val_avg_l2\":%.17g,\"val_mean_r_total\":%.17g}",
                  m.stage.c_str(), m.epoch, m.train_loss, m.val_avg_l2,
                  m.val_mean_r_total);
    out << buf << "\n";
}

}  // namespace

PipelineResult train_pipeline(const std::vector<UnifiedClip>& corpus,
                              const ModelConfig& mcfg, const TrainConfig& tcfg,
                              const RewardConfig& rcfg, const std::string& out_dir,
                              TrainStage stage) {
    validate_train_config(tcfg);
    validate_reward_config(rcfg);
    if (corpus.size() < 2) throw contract_error("train_pipeline: need at least 2 clips");

    std::filesystem::create_directories(out_dir);
    auto [train_clips, val_clips] = split(corpus, tcfg.val_fraction, tcfg.seed);
    TrajectoryStats stats = compute_trajectory_stats(train_clips);

    bool run_sft = stage != TrainStage::kRl;
    bool run_rl = stage != TrainStage::kSft;

    std::unique_ptr<Model> model_ptr;
    if (run_sft) {
        model_ptr = std::make_unique<Model>(mcfg, stats, tcfg.seed);
    } else {
        // RL-only runs continue from the SFT checkpoint of the same out_dir.
        std::string sft_path = out_dir + "/post_sft.ckpt";
        if (!std::filesystem::exists(sft_path)) {
            throw contract_error("train stage=rl requires an existing post_sft checkpoint: " +
                                 sft_path);
        }
        LoadedCheckpoint lc = load_checkpoint(sft_path);
        model_ptr = std::move(lc.model);
        stats = lc.stats;
    }
    Model& model = *model_ptr;

    PipelineResult result;
    result.metrics_path = out_dir + "/metrics.jsonl";
    std::ofstream metrics(result.metrics_path, std::ios::trunc);
    if (!metrics) throw io_error("cannot open metrics log: " + result.metrics_path);

    auto [l2_0, rt_0] = validate_model(model, val_clips, rcfg);
    result.untrained_val_avg_l2 = l2_0;
    log_metric_line(metrics, {"init", 0, 0.0, l2_0, rt_0});

    if (run_sft) {
        AdamWConfig ocfg;
        ocfg.lr = tcfg.sft.lr;
        AdamW opt(model.params(), ocfg);
        for (int epoch = 1; epoch <= tcfg.sft.epochs; ++epoch) {
            Rng order = Rng::substream(tcfg.seed, "sft_epoch" + std::to_string(epoch));
            std::vector<UnifiedClip> shuffled = train_clips;
            order.shuffle(shuffled);
            double loss_sum = 0.0;
            size_t steps = 0, micro = 0;
            for (size_t i = 0; i < shuffled.size(); i += tcfg.sft.batch) {
                size_t end = std::min(shuffled.size(), i + tcfg.sft.batch);
                std::vector<UnifiedClip> batch(shuffled.begin() + i, shuffled.begin() + end);
                loss_sum += sft_step(batch, model, tcfg.sft);
                ++steps;
                if (++micro == static_cast<size_t>(tcfg.sft.grad_accum)) {
                    opt.step();
                    model.params().zero_grads();
                    micro = 0;
                }
            }
            if (micro != 0) {
                opt.step();
                model.params().zero_grads();
            }
            auto [l2, rt] = validate_model(model, val_clips, rcfg);
            EpochMetrics m{"sft", epoch, loss_sum / static_cast<double>(steps), l2, rt};
            log_metric_line(metrics, m);
            result.epochs.push_back(m);
        }
        result.post_sft_path = out_dir + "/post_sft.ckpt";
        save_checkpoint(result.post_sft_path, model, stats, "post_sft");
    }

    if (run_rl) {
        std::unique_ptr<Model> ref = model.clone(stats, tcfg.seed);
        AdamWConfig ocfg;
        ocfg.lr = tcfg.rl.lr;
        AdamW opt(model.params(), ocfg);
        size_t per_epoch = tcfg.rl.clips_per_epoch > 0
                               ? std::min<size_t>(train_clips.size(),
                                                  static_cast<size_t>(tcfg.rl.clips_per_epoch))
                               : train_clips.size();
        size_t total_steps = std::max<size_t>(1, per_epoch * tcfg.rl.epochs);
        size_t step_index = 0;
        for (int epoch = 1; epoch <= tcfg.rl.epochs; ++epoch) {
            Rng order = Rng::substream(tcfg.seed, "rl_epoch" + std::to_string(epoch));
            std::vector<UnifiedClip> shuffled = train_clips;
            order.shuffle(shuffled);
            shuffled.resize(per_epoch);
            double loss_sum = 0.0;
            for (const auto& clip : shuffled) {
                if (tcfg.rl.lr_schedule == LrSchedule::kCosine) {
                    double frac = static_cast<double>(step_index) /
                                  static_cast<double>(total_steps);
                    opt.set_lr(tcfg.rl.lr * 0.5 * (1.0 + std::cos(M_PI * frac)));
                }
                model.params().zero_grads();
                uint64_t ss = Rng::mix(tcfg.seed, "rl_sample_e" + std::to_string(epoch));
                GrpoStats gs = grpo_step(clip, model, *ref, tcfg.rl, rcfg, ss);
                model.params().clip_grad_norm(tcfg.rl.max_grad_norm);
                opt.step();
                loss_sum += gs.loss;
                ++step_index;
            }
            auto [l2, rt] = validate_model(model, val_clips, rcfg);
            EpochMetrics m{"rl", epoch,
                           per_epoch ? loss_sum / static_cast<double>(per_epoch) : 0.0, l2,
                           rt};
            log_metric_line(metrics, m);
            result.epochs.push_back(m);
        }
        result.post_rl_path = out_dir + "/post_rl.ckpt";
        save_checkpoint(result.post_rl_path, model, stats, "post_rl");
    }

    return result;
}

}  // namespace aqp
