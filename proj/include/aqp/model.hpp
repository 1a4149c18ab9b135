#pragma once

#include <memory>

#include "aqp/decoder.hpp"
#include "aqp/encoder.hpp"

namespace aqp {

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;
    int horizon = 10;
    double query_var_floor = 1e-4;
};

// Full policy: context encoder + action-query decoder + refinement + head,
// all parameters in one store. Construction is deterministic in (cfg, stats,
// seed).
class Model {
public:
    Model(const ModelConfig& cfg, const TrajectoryStats& stats, uint64_t seed);

    TrajectoryPrediction predict(const UnifiedClip& clip) const;
    TrajectoryPrediction predict_autoregressive(const UnifiedClip& clip) const;
    EncodeResult encode_clip(const UnifiedClip& clip) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const ActionQueryBank& bank() const { return bank_; }
    const ContextEncoder& encoder() const { return *encoder_; }
    const ActionDecoder& decoder() const { return *decoder_; }

    // Copies every parameter value from other (shapes must match).
    void load_params_from(const Model& other);

    // Frozen copy for the GRPO KL anchor.
    std::unique_ptr<Model> clone(const TrajectoryStats& stats, uint64_t seed) const;

private:
    ModelConfig cfg_;
    ParamStore params_;
    std::unique_ptr<ContextEncoder> encoder_;
    std::unique_ptr<ActionDecoder> decoder_;
    ActionQueryBank bank_;
};

}  // namespace aqp
