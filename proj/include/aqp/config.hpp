#pragma once

#include <string>

#include "aqp/model.hpp"
#include "aqp/rewards.hpp"
#include "aqp/training.hpp"

namespace aqp {

struct EvalConfig {
    double replan_hz = 2.0;   // closed-loop replan rate; 2 Hz = every grid step
    int traces_per_kind = 1;
};

// Everything a run needs, archived as one JSON file. CLI flags override
// individual fields after parsing.
struct RunConfig {
    uint64_t seed = 7;
    std::string out_dir = "out";
    std::string corpus_path;
    ModelConfig model;
    RewardConfig reward;
    TrainConfig train;
    EvalConfig eval;
};

// Parses and validates; throws contract_error naming the offending field
// path (e.g. "reward.gamma") before any work starts.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace aqp
