#include "aqp/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace aqp {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw contract_error("config field " + path + "." + key + " has the wrong type");
    }
}

void check(bool ok, const std::string& path, const char* what) {
    if (!ok) throw contract_error("config field " + path + ": " + what);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw contract_error(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    read_field(j, "", "seed", cfg.seed);
    read_field(j, "", "out_dir", cfg.out_dir);
    read_field(j, "", "corpus", cfg.corpus_path);
    read_field(j, "", "horizon", cfg.model.horizon);
    read_field(j, "", "query_var_floor", cfg.model.query_var_floor);

    if (j.contains("encoder")) {
        const json& e = j["encoder"];
        read_field(e, "encoder", "layers", cfg.model.encoder.layers);
        read_field(e, "encoder", "heads", cfg.model.encoder.heads);
        read_field(e, "encoder", "d_model", cfg.model.encoder.d_model);
        read_field(e, "encoder", "d_ff", cfg.model.encoder.d_ff);
        read_field(e, "encoder", "time_freqs", cfg.model.encoder.time_freqs);
    }
    if (j.contains("decoder")) {
        const json& d = j["decoder"];
        read_field(d, "decoder", "blocks", cfg.model.decoder.blocks);
        read_field(d, "decoder", "heads", cfg.model.decoder.heads);
        read_field(d, "decoder", "d_ff", cfg.model.decoder.d_ff);
        read_field(d, "decoder", "refine_source_layer",
                   cfg.model.decoder.refine_source_layer);
        read_field(d, "decoder", "log_std_init", cfg.model.decoder.log_std_init);
    }
    if (j.contains("reward")) {
        const json& r = j["reward"];
        read_field(r, "reward", "alpha", cfg.reward.alpha);
        read_field(r, "reward", "beta", cfg.reward.beta);
        read_field(r, "reward", "gamma", cfg.reward.gamma);
        read_field(r, "reward", "theta1", cfg.reward.theta1);
        read_field(r, "reward", "theta2", cfg.reward.theta2);
        read_field(r, "reward", "theta3", cfg.reward.theta3);
        read_field(r, "reward", "steer_ratio_limit", cfg.reward.steer_ratio_limit);
        read_field(r, "reward", "acc_limit", cfg.reward.acc_limit);
        read_field(r, "reward", "dt", cfg.reward.dt);
        read_field(r, "reward", "clip_traj", cfg.reward.clip_traj);
        read_field(r, "reward", "traj_reward_offset", cfg.reward.traj_reward_offset);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        read_field(t, "train", "val_fraction", cfg.train.val_fraction);
        if (t.contains("sft")) {
            const json& s = t["sft"];
            read_field(s, "train.sft", "lr", cfg.train.sft.lr);
            read_field(s, "train.sft", "epochs", cfg.train.sft.epochs);
            read_field(s, "train.sft", "batch", cfg.train.sft.batch);
            read_field(s, "train.sft", "grad_accum", cfg.train.sft.grad_accum);
            std::string loss = "smooth_l1";
            read_field(s, "train.sft", "loss", loss);
            check(loss == "smooth_l1" || loss == "mse", "train.sft.loss",
                  "must be smooth_l1 or mse");
            cfg.train.sft.loss = loss == "mse" ? SftLoss::kMse : SftLoss::kSmoothL1;
        }
        if (t.contains("rl")) {
            const json& r = t["rl"];
            read_field(r, "train.rl", "lr", cfg.train.rl.lr);
            read_field(r, "train.rl", "epochs", cfg.train.rl.epochs);
            read_field(r, "train.rl", "group_size", cfg.train.rl.group_size);
            read_field(r, "train.rl", "kl_beta", cfg.train.rl.kl_beta);
            read_field(r, "train.rl", "max_grad_norm", cfg.train.rl.max_grad_norm);
            read_field(r, "train.rl", "clips_per_epoch", cfg.train.rl.clips_per_epoch);
            std::string sched = "cosine";
            read_field(r, "train.rl", "lr_schedule", sched);
            check(sched == "cosine" || sched == "constant", "train.rl.lr_schedule",
                  "must be cosine or constant");
            cfg.train.rl.lr_schedule =
                sched == "constant" ? LrSchedule::kConstant : LrSchedule::kCosine;
        }
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        read_field(e, "eval", "replan_hz", cfg.eval.replan_hz);
        read_field(e, "eval", "traces_per_kind", cfg.eval.traces_per_kind);
    }

    cfg.train.seed = cfg.seed;

    check(cfg.model.horizon >= 6, "horizon", "must be >= 6 (3 s of future at 0.5 s)");
    check(cfg.model.encoder.layers >= 1, "encoder.layers", "must be >= 1");
    check(cfg.model.encoder.d_model % cfg.model.encoder.heads == 0, "encoder.heads",
          "must divide d_model");
    check(cfg.model.encoder.d_model % cfg.model.decoder.heads == 0, "decoder.heads",
          "must divide encoder.d_model");
    check(cfg.model.decoder.refine_source_layer >= 0 &&
              cfg.model.decoder.refine_source_layer <= cfg.model.encoder.layers,
          "decoder.refine_source_layer", "out of range");
    check(cfg.model.query_var_floor > 0.0, "query_var_floor", "must be > 0");
    check(cfg.eval.replan_hz > 0.0, "eval.replan_hz", "must be > 0");
    check(cfg.eval.traces_per_kind >= 1, "eval.traces_per_kind", "must be >= 1");
    try {
        validate_reward_config(cfg.reward);
    } catch (const contract_error& e) {
        throw contract_error(std::string("config field reward: ") + e.what());
    }
    try {
        validate_train_config(cfg.train);
    } catch (const contract_error& e) {
        throw contract_error(std::string("config field train: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["corpus"] = cfg.corpus_path;
    j["horizon"] = cfg.model.horizon;
    j["query_var_floor"] = cfg.model.query_var_floor;
    j["encoder"] = {{"layers", cfg.model.encoder.layers},
                    {"heads", cfg.model.encoder.heads},
                    {"d_model", cfg.model.encoder.d_model},
                    {"d_ff", cfg.model.encoder.d_ff},
                    {"time_freqs", cfg.model.encoder.time_freqs}};
    j["decoder"] = {{"blocks", cfg.model.decoder.blocks},
                    {"heads", cfg.model.decoder.heads},
                    {"d_ff", cfg.model.decoder.d_ff},
                    {"refine_source_layer", cfg.model.decoder.refine_source_layer},
                    {"log_std_init", cfg.model.decoder.log_std_init}};
    j["reward"] = {{"alpha", cfg.reward.alpha},
                   {"beta", cfg.reward.beta},
                   {"gamma", cfg.reward.gamma},
                   {"theta1", cfg.reward.theta1},
                   {"theta2", cfg.reward.theta2},
                   {"theta3", cfg.reward.theta3},
                   {"steer_ratio_limit", cfg.reward.steer_ratio_limit},
                   {"acc_limit", cfg.reward.acc_limit},
                   {"dt", cfg.reward.dt},
                   {"clip_traj", cfg.reward.clip_traj},
                   {"traj_reward_offset", cfg.reward.traj_reward_offset}};
    j["train"] = {
        {"val_fraction", cfg.train.val_fraction},
        {"sft",
         {{"lr", cfg.train.sft.lr},
          {"epochs", cfg.train.sft.epochs},
          {"batch", cfg.train.sft.batch},
          {"grad_accum", cfg.train.sft.grad_accum},
          {"loss", cfg.train.sft.loss == SftLoss::kMse ? "mse" : "smooth_l1"}}},
        {"rl",
         {{"lr", cfg.train.rl.lr},
          {"epochs", cfg.train.rl.epochs},
          {"group_size", cfg.train.rl.group_size},
          {"kl_beta", cfg.train.rl.kl_beta},
          {"max_grad_norm", cfg.train.rl.max_grad_norm},
          {"clips_per_epoch", cfg.train.rl.clips_per_epoch},
          {"lr_schedule",
           cfg.train.rl.lr_schedule == LrSchedule::kConstant ? "constant" : "cosine"}}}};
    j["eval"] = {{"replan_hz", cfg.eval.replan_hz},
                 {"traces_per_kind", cfg.eval.traces_per_kind}};
    return j.dump(2);
}

}  // namespace aqp
