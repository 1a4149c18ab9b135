#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <vector>

#include "aqp/data.hpp"
#include "aqp/encoder.hpp"
#include "aqp/nn.hpp"

namespace aqp {

struct QueryInitMeta {
    std::string stats_source;
    uint64_t seed = 0;
    double var_floor = 0.0;
    size_t stats_count = 0;
};

// Learnable action queries: one row of width D per (step, coordinate) slot,
// flattened step-major (row i*N + n holds step i, coordinate n).
struct ActionQueryBank {
    Tensor queries;  // (H*N) x D
    int horizon = 0;
    int coord_dims = kCoordDims;
    int d_model = 0;
    QueryInitMeta init_meta;
};

// Each row (i, n) is drawn i.i.d. from Normal(mean[i][n], max(var[i][n], var_floor)).
ActionQueryBank init_action_queries(const TrajectoryStats& stats, int d_model,
                                    uint64_t seed, double var_floor, ParamStore& store);

struct DecoderConfig {
    int blocks = 2;
    int heads = 4;
    int d_ff = 512;
    // 1-based block index of the encoder layer the refinement module consumes;
    // 0 selects the middle layer.
    int refine_source_layer = 0;
    double log_std_init = -1.2039728043259361;  // ln(0.3 m)
    double log_std_min = -5.0;
    double log_std_max = 2.0;
};

struct TrajectoryPrediction {
    std::vector<std::array<double, 2>> waypoints;  // H x 2, meters, ego frame
    Tensor waypoints_t;    // (H*N) x 1, same values, on the autodiff graph
    Tensor refined_hidden; // (H*N) x D
};

// Diagonal-Gaussian action samples around a mean trajectory.
struct PolicySample {
    std::vector<std::vector<double>> trajectories;  // G x (H*N), step-major
    std::vector<double> log_density;                // exact diagonal-Gaussian log-pdf
};

PolicySample policy_sample(const std::vector<std::array<double, 2>>& mean_traj,
                           const std::vector<double>& log_std, int group_size,
                           uint64_t seed);

double gaussian_log_density(const std::vector<double>& x, const std::vector<double>& mean,
                            const std::vector<double>& log_std);

class ActionDecoder {
public:
    ActionDecoder(const DecoderConfig& cfg, int d_model, int horizon, int encoder_layers,
                  ParamStore& store, Rng& rng);

    // One parallel pass over all H*N query rows: bidirectional self-attention,
    // cross-attention into the encoder output, MLP. Increments the decode
    // counter by exactly one.
    Tensor decode_hidden(const ActionQueryBank& bank, const EncodeResult& ctx,
                         bool use_context = true) const;

    // Action refinement: MLP then cross-attention over the configured
    // intermediate encoder layers.
    Tensor refine(const Tensor& pred_hidden, const std::vector<Tensor>& intermediate) const;

    // Linear head, one scalar per query row.
    Tensor regress(const Tensor& refined) const;

    TrajectoryPrediction predict(const ActionQueryBank& bank, const EncodeResult& ctx) const;

    // Token-by-token baseline: emits the H*N scalars sequentially under a
    // causal mask, one decoder invocation per scalar, same parameters.
    TrajectoryPrediction predict_autoregressive(const ActionQueryBank& bank,
                                                const EncodeResult& ctx) const;

    // Index (0-based) into EncodeResult::layer_hidden used by refine.
    int refine_layer_index() const { return refine_layer_index_; }

    Tensor log_std() const { return log_std_; }
    Tensor clamped_log_std() const;
    std::vector<double> clamped_log_std_values() const;

    uint64_t decode_count() const { return decode_counter_->load(); }
    uint64_t baseline_decode_count() const { return baseline_counter_->load(); }
    void reset_counters() const;

    const DecoderConfig& config() const { return cfg_; }

private:
    struct Block {
        LnParams ln_self;
        MhaParams self_attn;
        LnParams ln_cross;
        MhaParams cross_attn;
        LnParams ln_mlp;
        MlpParams mlp;
    };

    Tensor run_blocks(const Tensor& queries, const EncodeResult& ctx,
                      const AttentionMask& self_mask, bool use_context) const;
    static std::vector<std::array<double, 2>> rows_to_waypoints(const Tensor& column,
                                                                int horizon);

    DecoderConfig cfg_;
    int d_model_ = 0;
    int horizon_ = 0;
    int refine_layer_index_ = 0;
    std::vector<Block> blocks_;
    LnParams refine_ln_mlp_;
    MlpParams refine_mlp_;
    LnParams refine_ln_cross_;
    MhaParams refine_cross_;
    Tensor head_w_, head_b_;
    Tensor log_std_;  // H x N flattened, learnable, state-independent
    std::shared_ptr<std::atomic<uint64_t>> decode_counter_;
    std::shared_ptr<std::atomic<uint64_t>> baseline_counter_;
};

}  // namespace aqp
