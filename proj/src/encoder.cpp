#include "aqp/encoder.hpp"

#include <cmath>

namespace aqp {

namespace {
constexpr double kPosScale = 0.1;  // keep raw meter/velocity features near O(1)
constexpr double kAccScale = 0.2;
}

ManeuverKind infer_maneuver(const UnifiedClip& clip) {
    const auto& h = clip.history;
    const EgoState& last = h.back();
    // mean longitudinal acceleration over the most recent states
    size_t tail = std::min<size_t>(3, h.size());
    double ax = 0.0;
    for (size_t i = h.size() - tail; i < h.size(); ++i) ax += h[i].ax;
    ax /= static_cast<double>(tail);
    if (ax < -0.5) return ManeuverKind::kStop;
    if (ax > 0.2) return ManeuverKind::kAccelerate;

    // heading change between earliest and latest velocity vectors
    const EgoState& first = h.front();
    double sp_first = std::hypot(first.vx, first.vy);
    double sp_last = std::hypot(last.vx, last.vy);
    if (sp_first > 0.1 && sp_last > 0.1) {
        double dh = std::atan2(last.vy, last.vx) - std::atan2(first.vy, first.vx);
        while (dh > M_PI) dh -= 2.0 * M_PI;
        while (dh < -M_PI) dh += 2.0 * M_PI;
        if (dh > 0.05) return ManeuverKind::kLeftTurn;
        if (dh < -0.05) return ManeuverKind::kRightTurn;
    }
    return ManeuverKind::kStraight;
}

int encoder_feature_width(const EncoderConfig& cfg) {
    return 6 + 2 * cfg.time_freqs + kManeuverCount + 1;
}

SceneTokens tokenize(const UnifiedClip& clip, const EncoderConfig& cfg) {
    SceneTokens toks;
    toks.len = static_cast<int>(clip.history.size()) + 1;
    toks.feat = encoder_feature_width(cfg);
    toks.data.assign(static_cast<size_t>(toks.len) * toks.feat, 0.0);
    ManeuverKind tag = infer_maneuver(clip);

    auto fill = [&](int row, double t, const EgoState* s, bool summary) {
        double* f = toks.data.data() + static_cast<size_t>(row) * toks.feat;
        int k = 0;
        if (s) {
            f[k++] = s->x * kPosScale;
            f[k++] = s->y * kPosScale;
            f[k++] = s->vx * kPosScale;
            f[k++] = s->vy * kPosScale;
            f[k++] = s->ax * kAccScale;
            f[k++] = s->ay * kAccScale;
        } else {
            k = 6;
        }
        for (int q = 0; q < cfg.time_freqs; ++q) {
            double omega = 2.0 * M_PI / std::pow(2.0, q + 1);
            f[k++] = std::sin(omega * t);
            f[k++] = std::cos(omega * t);
        }
        f[k + static_cast<int>(tag)] = 1.0;
        k += kManeuverCount;
        f[k] = summary ? 1.0 : 0.0;
        toks.times.push_back(t);
    };

    int row = 0;
    for (const auto& s : clip.history) fill(row++, s.t_offset, &s, false);
    fill(row, kStepSeconds, nullptr, true);  // summary token one step past t = 0
    return toks;
}

ContextEncoder::ContextEncoder(const EncoderConfig& cfg, ParamStore& store, Rng& rng)
    : cfg_(cfg) {
    int f = encoder_feature_width(cfg);
    w_embed_ = make_linear_weight(store, "encoder.embed.w", f, cfg.d_model, rng);
    b_embed_ = store.add("encoder.embed.b", Tensor::zeros({cfg.d_model}, true));
    summary_embed_ = store.add("encoder.summary",
                               Tensor::randn({cfg.d_model}, rng, 0.02, true));
    for (int l = 0; l < cfg.layers; ++l) {
        std::string prefix = "encoder.block" + std::to_string(l);
        Block b;
        b.ln1 = make_ln(store, prefix + ".ln1", cfg.d_model);
        b.attn = make_mha(store, prefix + ".attn", cfg.d_model, cfg.heads, rng);
        b.ln2 = make_ln(store, prefix + ".ln2", cfg.d_model);
        b.mlp = make_mlp(store, prefix + ".mlp", cfg.d_model, cfg.d_ff, rng);
        blocks_.push_back(std::move(b));
    }
}

EncodeResult ContextEncoder::encode(const SceneTokens& tokens) const {
    if (tokens.len < 2) throw contract_error("encode: need at least 2 tokens");
    if (tokens.feat != encoder_feature_width(cfg_)) {
        throw shape_error("encode: token feature width does not match config");
    }
    Tensor x = Tensor::from({tokens.len, tokens.feat}, tokens.data);
    Tensor h = add_rowvec(matmul(x, w_embed_), b_embed_);
    h = add_row_to_row(h, tokens.len - 1, summary_embed_);

    EncodeResult result;
    AttentionMask bidir = AttentionMask::bidirectional();
    for (const auto& b : blocks_) {
        Tensor normed = ln_forward(h, b.ln1);
        h = add(h, multihead_attention(normed, normed, b.attn, bidir));
        h = add(h, mlp_forward(ln_forward(h, b.ln2), b.mlp));
        result.layer_hidden.push_back(h);
    }
    result.final_hidden = h;
    return result;
}

}  // namespace aqp
