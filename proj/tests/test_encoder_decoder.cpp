#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aqp/model.hpp"
#include "aqp/training.hpp"

using namespace aqp;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.encoder.layers = 2;
    cfg.encoder.heads = 2;
    cfg.encoder.d_model = 32;
    cfg.encoder.d_ff = 64;
    cfg.decoder.blocks = 2;
    cfg.decoder.heads = 2;
    cfg.decoder.d_ff = 64;
    cfg.horizon = 10;
    return cfg;
}

std::vector<UnifiedClip> small_corpus(int n = 24, uint64_t seed = 3) {
    return synth_scenarios(n,
                           {ManeuverKind::kStraight, ManeuverKind::kLeftTurn,
                            ManeuverKind::kStop},
                           seed);
}

void zero_param(ParamStore& store, const std::string& name) {
    Tensor* t = store.find(name);
    REQUIRE(t != nullptr);
    std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0);
}

}  // namespace

TEST_CASE("tokenize emits one token per state plus a summary token") {
    EncoderConfig cfg;
    UnifiedClip clip = small_corpus(1)[0];
    SceneTokens toks = tokenize(clip, cfg);
    CHECK(toks.len == static_cast<int>(clip.history.size()) + 1);  // 7 -> 8
    CHECK(toks.feat == encoder_feature_width(cfg));
    for (size_t i = 1; i < toks.times.size(); ++i) CHECK(toks.times[i] > toks.times[i - 1]);

    SceneTokens again = tokenize(clip, cfg);
    CHECK(toks.data == again.data);
}

TEST_CASE("straight-line clip produces constant velocity features") {
    EncoderConfig cfg;
    SynthParams p;
    p.speed = 5.0;
    UnifiedClip clip = make_synth_clip(p, "s");
    SceneTokens toks = tokenize(clip, cfg);
    // feature 2 is vx (scaled); identical across the history tokens
    double first = toks.data[2];
    for (int r = 1; r < toks.len - 1; ++r) {
        CHECK(toks.data[static_cast<size_t>(r) * toks.feat + 2] ==
              doctest::Approx(first).epsilon(1e-12));
    }
}

TEST_CASE("encode output and every intermediate layer have shape L x D") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    EncodeResult enc = model.encode_clip(corpus[0]);
    int L = static_cast<int>(corpus[0].history.size()) + 1;
    CHECK(enc.final_hidden.rows() == L);
    CHECK(enc.final_hidden.cols() == cfg.encoder.d_model);
    REQUIRE(enc.layer_hidden.size() == static_cast<size_t>(cfg.encoder.layers));
    for (const auto& h : enc.layer_hidden) {
        CHECK(h.rows() == L);
        CHECK(h.cols() == cfg.encoder.d_model);
    }
    // determinism
    EncodeResult enc2 = model.encode_clip(corpus[0]);
    CHECK(enc.final_hidden.data() == enc2.final_hidden.data());
}

TEST_CASE("zeroed output projections reduce the encoder to its embedding") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    for (int l = 0; l < cfg.encoder.layers; ++l) {
        std::string prefix = "encoder.block" + std::to_string(l);
        zero_param(model.params(), prefix + ".attn.wo");
        zero_param(model.params(), prefix + ".attn.bo");
        zero_param(model.params(), prefix + ".mlp.w2");
        zero_param(model.params(), prefix + ".mlp.b2");
    }
    SceneTokens toks = tokenize(corpus[0], cfg.encoder);
    EncodeResult enc = model.encoder().encode(toks);

    // reconstruct the embedding independently
    Tensor x = Tensor::from({toks.len, toks.feat}, toks.data);
    Tensor expect = add_rowvec(matmul(x, *model.params().find("encoder.embed.w")),
                               *model.params().find("encoder.embed.b"));
    expect = add_row_to_row(expect, toks.len - 1, *model.params().find("encoder.summary"));
    REQUIRE(enc.final_hidden.numel() == expect.numel());
    for (size_t i = 0; i < expect.numel(); ++i) {
        CHECK(enc.final_hidden.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("query initialization is seeded, floored and records its meta") {
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    ParamStore s1, s2;
    ActionQueryBank a = init_action_queries(stats, 64, 17, 1e-4, s1);
    ActionQueryBank b = init_action_queries(stats, 64, 17, 1e-4, s2);
    CHECK(a.queries.data() == b.queries.data());
    CHECK(a.queries.rows() == stats.horizon * kCoordDims);
    CHECK(a.queries.cols() == 64);
    CHECK(a.init_meta.seed == 17);
    CHECK(a.init_meta.var_floor == 1e-4);
    CHECK(a.init_meta.stats_count == stats.count);

    ParamStore s3;
    ActionQueryBank c = init_action_queries(stats, 64, 18, 1e-4, s3);
    CHECK(a.queries.data() != c.queries.data());

    ParamStore s4;
    CHECK_THROWS_AS(init_action_queries(stats, 64, 17, 0.0, s4), contract_error);
}

TEST_CASE("degenerate zero-variance corpus with a tiny floor gives near-constant rows") {
    UnifiedClip c = small_corpus(1)[0];
    TrajectoryStats stats = compute_trajectory_stats({c, c, c});
    ParamStore store;
    ActionQueryBank bank = init_action_queries(stats, 256, 9, 1e-12, store);
    for (int i = 0; i < stats.horizon; ++i) {
        for (int n = 0; n < 2; ++n) {
            const double* row = bank.queries.data().data() +
                                static_cast<size_t>(i * 2 + n) * 256;
            for (int d = 0; d < 256; ++d) {
                CHECK(std::fabs(row[d] - stats.mean[i][n]) < 1e-4);
            }
        }
    }
}

TEST_CASE("row sample means concentrate around the corpus means (CLT bound)") {
    auto corpus = small_corpus(64, 21);
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    ParamStore store;
    const int D = 4096;
    ActionQueryBank bank = init_action_queries(stats, D, 23, 1e-4, store);
    int within = 0, rows = stats.horizon * 2;
    for (int r = 0; r < rows; ++r) {
        int i = r / 2, n = r % 2;
        double mu = stats.mean[i][n];
        double sd = std::sqrt(std::max(stats.var[i][n], 1e-4));
        double sample_mean = 0.0;
        const double* row = bank.queries.data().data() + static_cast<size_t>(r) * D;
        for (int d = 0; d < D; ++d) sample_mean += row[d];
        sample_mean /= D;
        if (std::fabs(sample_mean - mu) <= 4.0 * sd / std::sqrt(double(D))) ++within;
    }
    CHECK(within == rows);  // 4-sigma bound per the bank invariant
}

TEST_CASE("decode increments the counter by exactly one per call") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    model.decoder().reset_counters();
    NoGradGuard ng;
    for (int i = 0; i < 5; ++i) model.predict(corpus[i]);
    CHECK(model.decoder().decode_count() == 5);
    CHECK(model.decoder().baseline_decode_count() == 0);
}

TEST_CASE("cross-attention context is actually consumed") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    NoGradGuard ng;
    EncodeResult enc = model.encode_clip(corpus[0]);
    Tensor with_ctx = model.decoder().decode_hidden(model.bank(), enc, true);
    Tensor without_ctx = model.decoder().decode_hidden(model.bank(), enc, false);
    double diff = 0.0;
    for (size_t i = 0; i < with_ctx.numel(); ++i) {
        diff = std::max(diff, std::fabs(with_ctx.data()[i] - without_ctx.data()[i]));
    }
    CHECK(diff > 1e-6);
}

TEST_CASE("self-attention is bidirectional: swapping query rows swaps outputs") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    NoGradGuard ng;
    EncodeResult enc = model.encode_clip(corpus[0]);

    Tensor base = model.decoder().decode_hidden(model.bank(), enc);

    // swap rows 1 and 18 of the bank
    ActionQueryBank swapped = model.bank();
    std::vector<double> data = model.bank().queries.data();
    int D = model.bank().queries.cols();
    for (int d = 0; d < D; ++d) {
        std::swap(data[static_cast<size_t>(1) * D + d], data[static_cast<size_t>(18) * D + d]);
    }
    swapped.queries = Tensor::from(model.bank().queries.shape(), std::move(data));
    Tensor perm = model.decoder().decode_hidden(swapped, enc);

    for (int d = 0; d < D; ++d) {
        CHECK(perm.at(1, d) == doctest::Approx(base.at(18, d)).epsilon(1e-10));
        CHECK(perm.at(18, d) == doctest::Approx(base.at(1, d)).epsilon(1e-10));
        CHECK(perm.at(5, d) == doctest::Approx(base.at(5, d)).epsilon(1e-10));
    }
}

TEST_CASE("refine demands context and is a residual identity when zeroed") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    NoGradGuard ng;
    EncodeResult enc = model.encode_clip(corpus[0]);
    Tensor hidden = model.decoder().decode_hidden(model.bank(), enc);

    CHECK_THROWS_AS(model.decoder().refine(hidden, {}), contract_error);

    Tensor refined = model.decoder().refine(hidden, {enc.layer_hidden[0]});
    CHECK(refined.rows() == hidden.rows());
    CHECK(refined.cols() == hidden.cols());

    zero_param(model.params(), "decoder.refine.mlp.w2");
    zero_param(model.params(), "decoder.refine.mlp.b2");
    zero_param(model.params(), "decoder.refine.cross.wo");
    zero_param(model.params(), "decoder.refine.cross.bo");
    Tensor identity = model.decoder().refine(hidden, {enc.layer_hidden[0]});
    for (size_t i = 0; i < hidden.numel(); ++i) {
        CHECK(identity.data()[i] == doctest::Approx(hidden.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("regress with zero weights emits the bias; ordering is step-major") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    zero_param(model.params(), "decoder.head.w");
    model.params().find("decoder.head.b")->mutable_data()[0] = 2.5;
    NoGradGuard ng;
    TrajectoryPrediction pred = model.predict(corpus[0]);
    for (const auto& w : pred.waypoints) {
        CHECK(w[0] == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(w[1] == doctest::Approx(2.5).epsilon(1e-12));
    }

    // step-major contract: waypoint (i, n) reads column row 2 i + n
    Model fresh(cfg, stats, 6);
    TrajectoryPrediction p2 = fresh.predict(corpus[0]);
    for (int i = 0; i < cfg.horizon; ++i) {
        CHECK(p2.waypoints[i][0] == p2.waypoints_t.at(2 * i, 0));
        CHECK(p2.waypoints[i][1] == p2.waypoints_t.at(2 * i + 1, 0));
    }
}

TEST_CASE("autoregressive baseline performs >= H*N decoder invocations per clip") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    model.decoder().reset_counters();
    NoGradGuard ng;
    TrajectoryPrediction pred = model.predict_autoregressive(corpus[0]);
    CHECK(model.decoder().baseline_decode_count() >= 20);
    CHECK(model.decoder().decode_count() == 0);
    REQUIRE(pred.waypoints.size() == 10);
    for (const auto& w : pred.waypoints) {
        CHECK(std::isfinite(w[0]));
        CHECK(std::isfinite(w[1]));
    }
}

TEST_CASE("policy sampling: determinism, log-density at the mean, sigma scaling") {
    std::vector<std::array<double, 2>> mean(10);
    for (int i = 0; i < 10; ++i) mean[i] = {0.5 * i, -0.1 * i};
    std::vector<double> ls(20, -1.0);

    PolicySample a = policy_sample(mean, ls, 8, 99);
    PolicySample b = policy_sample(mean, ls, 8, 99);
    CHECK(a.trajectories == b.trajectories);
    CHECK(a.log_density == b.log_density);
    PolicySample c = policy_sample(mean, ls, 8, 100);
    CHECK(a.trajectories != c.trajectories);

    CHECK_THROWS_AS(policy_sample(mean, ls, 1, 99), contract_error);

    std::vector<double> flat(20);
    for (int i = 0; i < 10; ++i) {
        flat[2 * i] = mean[i][0];
        flat[2 * i + 1] = mean[i][1];
    }
    double at_mean = gaussian_log_density(flat, flat, ls);
    double expect = 20.0 - 10.0 * std::log(2.0 * M_PI);  // -sum(ls) - (d/2) log 2pi
    CHECK(at_mean == doctest::Approx(expect).epsilon(1e-12));

    // clamp floor: sigma = e^-5, samples hug the mean
    std::vector<double> tight(20, -5.0);
    PolicySample d = policy_sample(mean, tight, 8, 7);
    for (const auto& traj : d.trajectories) {
        for (size_t i = 0; i < traj.size(); ++i) {
            CHECK(std::fabs(traj[i] - flat[i]) < 0.05);
        }
    }
}

TEST_CASE("end-to-end SFT loss gradient matches finite differences (small model)") {
    ModelConfig cfg = small_config();
    cfg.encoder.layers = 2;
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);

    std::vector<UnifiedClip> batch = {corpus[0], corpus[1]};
    auto loss_fn = [&](const std::vector<Tensor>&) {
        Tensor total;
        for (const auto& clip : batch) {
            TrajectoryPrediction pred = model.predict(clip);
            std::vector<double> flat;
            for (const auto& w : clip.actions) {
                flat.push_back(w[0]);
                flat.push_back(w[1]);
            }
            int rows = static_cast<int>(flat.size());
            Tensor target = Tensor::from({rows, 1}, std::move(flat));
            Tensor l = smooth_l1_loss(pred.waypoints_t, target);
            total = total.valid() ? add(total, l) : l;
        }
        return scale(total, 0.5);
    };
    std::vector<Tensor> params;
    for (const auto& [name, t] : model.params().items()) params.push_back(t);
    Rng rng(123);
    double err = grad_check(loss_fn, params, 1e-5, 6, rng);
    CHECK(err < 1e-4);
}

TEST_CASE("gradient reaches the query bank, log-std stays clamped") {
    ModelConfig cfg = small_config();
    auto corpus = small_corpus();
    TrajectoryStats stats = compute_trajectory_stats(corpus);
    Model model(cfg, stats, 5);
    TrajectoryPrediction pred = model.predict(corpus[0]);
    backward(sum(pred.waypoints_t));
    Tensor* bank = model.params().find("decoder.queries");
    REQUIRE(bank != nullptr);
    double norm = 0.0;
    for (double g : bank->grad()) norm += g * g;
    CHECK(norm > 0.0);

    Tensor* ls = model.params().find("decoder.log_std");
    REQUIRE(ls != nullptr);
    ls->mutable_data()[0] = -9.0;
    ls->mutable_data()[1] = 9.0;
    auto clamped = model.decoder().clamped_log_std_values();
    CHECK(clamped[0] == -5.0);
    CHECK(clamped[1] == 2.0);
}
