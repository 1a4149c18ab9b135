#include "aqp/model.hpp"

namespace aqp {

Model::Model(const ModelConfig& cfg, const TrajectoryStats& stats, uint64_t seed)
    : cfg_(cfg) {
    if (stats.horizon != cfg.horizon) {
        throw contract_error("model: stats horizon does not match configured horizon");
    }
    Rng init_rng = Rng::substream(seed, "model_init");
    encoder_ = std::make_unique<ContextEncoder>(cfg.encoder, params_, init_rng);
    decoder_ = std::make_unique<ActionDecoder>(cfg.decoder, cfg.encoder.d_model,
                                               cfg.horizon, cfg.encoder.layers, params_,
                                               init_rng);
    bank_ = init_action_queries(stats, cfg.encoder.d_model, seed, cfg.query_var_floor,
                                params_);
}

EncodeResult Model::encode_clip(const UnifiedClip& clip) const {
    return encoder_->encode(tokenize(clip, cfg_.encoder));
}

TrajectoryPrediction Model::predict(const UnifiedClip& clip) const {
    return decoder_->predict(bank_, encode_clip(clip));
}

TrajectoryPrediction Model::predict_autoregressive(const UnifiedClip& clip) const {
    return decoder_->predict_autoregressive(bank_, encode_clip(clip));
}

void Model::load_params_from(const Model& other) {
    const auto& src = other.params_.items();
    const auto& dst = params_.items();
    if (src.size() != dst.size()) throw contract_error("load_params_from: store mismatch");
    for (size_t i = 0; i < src.size(); ++i) {
        if (src[i].first != dst[i].first ||
            src[i].second.shape() != dst[i].second.shape()) {
            throw contract_error("load_params_from: parameter mismatch at " + src[i].first);
        }
        Tensor t = dst[i].second;
        t.mutable_data() = src[i].second.data();
    }
}

std::unique_ptr<Model> Model::clone(const TrajectoryStats& stats, uint64_t seed) const {
    auto copy = std::make_unique<Model>(cfg_, stats, seed);
    copy->load_params_from(*this);
    return copy;
}

}  // namespace aqp
