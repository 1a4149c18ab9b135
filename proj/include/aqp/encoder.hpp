#pragma once

#include <vector>

#include "aqp/data.hpp"
#include "aqp/nn.hpp"

namespace aqp {

struct EncoderConfig {
    int layers = 4;
    int heads = 4;
    int d_model = 128;
    int d_ff = 512;
    int time_freqs = 4;  // sinusoidal pairs over t_offset
};

// Tokenized ego history: one token per history state plus a trailing summary
// token. times are strictly increasing (summary sits one step past t = 0).
struct SceneTokens {
    int len = 0;   // L
    int feat = 0;  // F
    std::vector<double> data;   // L x F row-major
    std::vector<double> times;  // L entries
};

// Coarse maneuver tag from history kinematics; feeds the one-hot feature.
ManeuverKind infer_maneuver(const UnifiedClip& clip);

int encoder_feature_width(const EncoderConfig& cfg);
SceneTokens tokenize(const UnifiedClip& clip, const EncoderConfig& cfg);

struct EncodeResult {
    Tensor final_hidden;                // L x D
    std::vector<Tensor> layer_hidden;   // per-block outputs, each L x D
};

class ContextEncoder {
public:
    ContextEncoder(const EncoderConfig& cfg, ParamStore& store, Rng& rng);

    EncodeResult encode(const SceneTokens& tokens) const;
    const EncoderConfig& config() const { return cfg_; }

private:
    struct Block {
        LnParams ln1;
        MhaParams attn;
        LnParams ln2;
        MlpParams mlp;
    };

    EncoderConfig cfg_;
    Tensor w_embed_, b_embed_;
    Tensor summary_embed_;  // learned summary-token embedding, added post-projection
    std::vector<Block> blocks_;
};

}  // namespace aqp
