#include "aqp/decoder.hpp"

#include <cmath>

namespace aqp {

ActionQueryBank init_action_queries(const TrajectoryStats& stats, int d_model,
                                    uint64_t seed, double var_floor, ParamStore& store) {
    if (stats.horizon <= 0) throw contract_error("init_action_queries: empty stats");
    if (var_floor <= 0.0) throw contract_error("init_action_queries: var_floor must be > 0");
    int rows = stats.horizon * kCoordDims;
    Rng rng = Rng::substream(seed, "action_queries");
    std::vector<double> data(static_cast<size_t>(rows) * d_model);
    for (int i = 0; i < stats.horizon; ++i) {
        for (int n = 0; n < kCoordDims; ++n) {
            double mu = stats.mean[i][n];
            double sd = std::sqrt(std::max(stats.var[i][n], var_floor));
            double* row = data.data() + static_cast<size_t>(i * kCoordDims + n) * d_model;
            for (int d = 0; d < d_model; ++d) row[d] = rng.normal(mu, sd);
        }
    }
    ActionQueryBank bank;
    bank.queries = store.add("decoder.queries",
                             Tensor::from({rows, d_model}, std::move(data), true));
    bank.horizon = stats.horizon;
    bank.d_model = d_model;
    bank.init_meta.seed = seed;
    bank.init_meta.var_floor = var_floor;
    bank.init_meta.stats_count = stats.count;
    return bank;
}

ActionDecoder::ActionDecoder(const DecoderConfig& cfg, int d_model, int horizon,
                             int encoder_layers, ParamStore& store, Rng& rng)
    : cfg_(cfg), d_model_(d_model), horizon_(horizon) {
    if (cfg.blocks < 1) throw contract_error("decoder: need at least one block");
    if (encoder_layers < 1) throw contract_error("decoder: encoder_layers < 1");
    if (cfg.refine_source_layer < 0 || cfg.refine_source_layer > encoder_layers) {
        throw contract_error("decoder: refine_source_layer out of range");
    }
    refine_layer_index_ = cfg.refine_source_layer == 0 ? (encoder_layers - 1) / 2
                                                       : cfg.refine_source_layer - 1;

    for (int l = 0; l < cfg.blocks; ++l) {
        std::string prefix = "decoder.block" + std::to_string(l);
        Block b;
        b.ln_self = make_ln(store, prefix + ".ln_self", d_model);
        b.self_attn = make_mha(store, prefix + ".self", d_model, cfg.heads, rng);
        b.ln_cross = make_ln(store, prefix + ".ln_cross", d_model);
        b.cross_attn = make_mha(store, prefix + ".cross", d_model, cfg.heads, rng);
        b.ln_mlp = make_ln(store, prefix + ".ln_mlp", d_model);
        b.mlp = make_mlp(store, prefix + ".mlp", d_model, cfg.d_ff, rng);
        blocks_.push_back(std::move(b));
    }
    refine_ln_mlp_ = make_ln(store, "decoder.refine.ln_mlp", d_model);
    refine_mlp_ = make_mlp(store, "decoder.refine.mlp", d_model, cfg.d_ff, rng);
    refine_ln_cross_ = make_ln(store, "decoder.refine.ln_cross", d_model);
    refine_cross_ = make_mha(store, "decoder.refine.cross", d_model, cfg.heads, rng);
    head_w_ = make_linear_weight(store, "decoder.head.w", d_model, 1, rng);
    head_b_ = store.add("decoder.head.b", Tensor::zeros({1}, true));
    // Column vector so it composes with the (H*N) x 1 regression output.
    log_std_ = store.add("decoder.log_std",
                         Tensor::full({horizon * kCoordDims, 1}, cfg.log_std_init, true));

    decode_counter_ = std::make_shared<std::atomic<uint64_t>>(0);
    baseline_counter_ = std::make_shared<std::atomic<uint64_t>>(0);
}

Tensor ActionDecoder::run_blocks(const Tensor& queries, const EncodeResult& ctx,
                                 const AttentionMask& self_mask, bool use_context) const {
    Tensor h = queries;
    for (const auto& b : blocks_) {
        Tensor normed = ln_forward(h, b.ln_self);
        h = add(h, multihead_attention(normed, normed, b.self_attn, self_mask));
        if (use_context) {
            h = add(h, multihead_attention(ln_forward(h, b.ln_cross), ctx.final_hidden,
                                           b.cross_attn, AttentionMask::bidirectional()));
        }
        h = add(h, mlp_forward(ln_forward(h, b.ln_mlp), b.mlp));
    }
    return h;
}

Tensor ActionDecoder::decode_hidden(const ActionQueryBank& bank, const EncodeResult& ctx,
                                    bool use_context) const {
    if (bank.queries.cols() != d_model_) {
        throw shape_error("decode_hidden: query width does not match d_model");
    }
    decode_counter_->fetch_add(1);
    return run_blocks(bank.queries, ctx, AttentionMask::bidirectional(), use_context);
}

Tensor ActionDecoder::refine(const Tensor& pred_hidden,
                             const std::vector<Tensor>& intermediate) const {
    if (intermediate.empty()) {
        throw contract_error("refine: need at least one intermediate encoder layer");
    }
    Tensor h = add(pred_hidden, mlp_forward(ln_forward(pred_hidden, refine_ln_mlp_),
                                            refine_mlp_));
    Tensor mem = intermediate.size() == 1 ? intermediate[0] : concat_rows(intermediate);
    return add(h, multihead_attention(ln_forward(h, refine_ln_cross_), mem, refine_cross_,
                                      AttentionMask::bidirectional()));
}

Tensor ActionDecoder::regress(const Tensor& refined) const {
    return add_rowvec(matmul(refined, head_w_), head_b_);
}

std::vector<std::array<double, 2>> ActionDecoder::rows_to_waypoints(const Tensor& column,
                                                                    int horizon) {
    std::vector<std::array<double, 2>> wps(static_cast<size_t>(horizon));
    const auto& v = column.data();
    for (int i = 0; i < horizon; ++i) {
        wps[i] = {v[static_cast<size_t>(i) * 2], v[static_cast<size_t>(i) * 2 + 1]};
    }
    return wps;
}

TrajectoryPrediction ActionDecoder::predict(const ActionQueryBank& bank,
                                            const EncodeResult& ctx) const {
    TrajectoryPrediction out;
    Tensor hidden = decode_hidden(bank, ctx);
    out.refined_hidden = refine(hidden, {ctx.layer_hidden.at(refine_layer_index_)});
    out.waypoints_t = regress(out.refined_hidden);
    out.waypoints = rows_to_waypoints(out.waypoints_t, bank.horizon);
    return out;
}

TrajectoryPrediction ActionDecoder::predict_autoregressive(const ActionQueryBank& bank,
                                                           const EncodeResult& ctx) const {
    int total = bank.horizon * bank.coord_dims;
    std::vector<double> scalars(static_cast<size_t>(total));
    TrajectoryPrediction out;
    for (int t = 1; t <= total; ++t) {
        baseline_counter_->fetch_add(1);
        Tensor prefix = slice_rows(bank.queries, 0, t);
        Tensor hidden = run_blocks(prefix, ctx, AttentionMask::causal(t), true);
        Tensor refined = refine(hidden, {ctx.layer_hidden.at(refine_layer_index_)});
        Tensor col = regress(refined);
        scalars[static_cast<size_t>(t - 1)] = col.at(t - 1, 0);
        if (t == total) out.refined_hidden = refined;
    }
    out.waypoints_t = Tensor::from({total, 1}, scalars);
    out.waypoints = rows_to_waypoints(out.waypoints_t, bank.horizon);
    return out;
}

Tensor ActionDecoder::clamped_log_std() const {
    return clamp(log_std_, cfg_.log_std_min, cfg_.log_std_max);
}

std::vector<double> ActionDecoder::clamped_log_std_values() const {
    std::vector<double> out = log_std_.data();
    for (double& v : out) v = std::min(std::max(v, cfg_.log_std_min), cfg_.log_std_max);
    return out;
}

void ActionDecoder::reset_counters() const {
    decode_counter_->store(0);
    baseline_counter_->store(0);
}

double gaussian_log_density(const std::vector<double>& x, const std::vector<double>& mean,
                            const std::vector<double>& log_std) {
    if (x.size() != mean.size() || x.size() != log_std.size()) {
        throw shape_error("gaussian_log_density: size mismatch");
    }
    constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2 pi)
    double total = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double z = (x[i] - mean[i]) * std::exp(-log_std[i]);
        total += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
    }
    return total;
}

PolicySample policy_sample(const std::vector<std::array<double, 2>>& mean_traj,
                           const std::vector<double>& log_std, int group_size,
                           uint64_t seed) {
    if (group_size < 2) throw contract_error("policy_sample: group_size must be >= 2");
    size_t dims = mean_traj.size() * 2;
    if (log_std.size() != dims) throw shape_error("policy_sample: log_std size mismatch");
    std::vector<double> mean(dims);
    for (size_t i = 0; i < mean_traj.size(); ++i) {
        mean[2 * i] = mean_traj[i][0];
        mean[2 * i + 1] = mean_traj[i][1];
    }
    Rng rng = Rng::substream(seed, "policy_sample");
    PolicySample out;
    out.trajectories.resize(static_cast<size_t>(group_size));
    out.log_density.resize(static_cast<size_t>(group_size));
    for (int g = 0; g < group_size; ++g) {
        std::vector<double> traj(dims);
        for (size_t i = 0; i < dims; ++i) {
            traj[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
        }
        out.log_density[static_cast<size_t>(g)] = gaussian_log_density(traj, mean, log_std);
        out.trajectories[static_cast<size_t>(g)] = std::move(traj);
    }
    return out;
}

}  // namespace aqp
