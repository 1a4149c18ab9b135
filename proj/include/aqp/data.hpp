#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "aqp/errors.hpp"
#include "aqp/rng.hpp"

namespace aqp {

constexpr double kStepSeconds = 0.5;  // fixed sampling grid
constexpr int kCoordDims = 2;         // BEV x (forward), y (leftward)

enum class Source {
    kNavsim,
    kNuscenes,
    kWaymo,
    kArgoverse2,
    kKitti,
    kMapillary,
    kOnce,
    kIdd,
};

const char* source_name(Source s);
std::optional<Source> source_from_name(const std::string& name);
constexpr int kSourceCount = 8;

// Ego state at a non-positive 0.5 s offset, in the ego frame at t = 0.
struct EgoState {
    double t_offset = 0.0;  // seconds, <= 0
    double x = 0.0, y = 0.0;
    double vx = 0.0, vy = 0.0;
    double ax = 0.0, ay = 0.0;
};

// One driving sample in the unified format.
struct UnifiedClip {
    std::string clip_id;
    Source source = Source::kNuscenes;
    std::vector<EgoState> history;                 // oldest first, last at t = 0
    std::vector<std::array<double, 2>> actions;    // H future waypoints, meters
    std::optional<std::string> reasoning_text;
    std::vector<std::string> camera_refs;          // path references only
};

// Validates all UnifiedClip invariants; returns a reason on failure.
std::optional<std::string> validate_clip(const UnifiedClip& clip, int expected_horizon);

// Per-(step, coordinate) corpus statistics.
struct TrajectoryStats {
    int horizon = 0;
    std::vector<std::array<double, 2>> mean;  // H x 2
    std::vector<std::array<double, 2>> var;   // H x 2, population variance
    size_t count = 0;
};

// ---- unified JSON format ----

std::string clip_to_json(const UnifiedClip& clip);
UnifiedClip clip_from_json(const std::string& json_text);
void write_corpus(const std::string& path, const std::vector<UnifiedClip>& clips);
std::vector<UnifiedClip> read_corpus(const std::string& path);

// ---- operations ----

struct IngestReport {
    size_t parsed = 0;
    size_t dropped = 0;
    std::vector<std::string> drop_reasons;
};

// Parses the per-source fixture schema (see docs/adapters.md) and emits valid
// clips; malformed or physically invalid records are dropped with a reason.
// Some sources prepend the current pose [0, 0] to the action rows; with
// include_origin_row = false (the training default) that leading row is
// stripped before the horizon check, with true it counts toward the horizon.
std::vector<UnifiedClip> ingest_adapter(Source source, const std::string& path,
                                        int expected_horizon, IngestReport* report = nullptr,
                                        bool include_origin_row = false);

TrajectoryStats compute_trajectory_stats(const std::vector<UnifiedClip>& clips);

// Renders the SFT prompt template for a clip. Numbers carry up to two
// decimals with at least one (7 -> "7.0", 6.93 -> "6.93").
std::string render_prompt(const UnifiedClip& clip);
std::string format_prompt_number(double v);

enum class ManeuverKind { kStraight, kLeftTurn, kRightTurn, kStop, kAccelerate };
const char* maneuver_name(ManeuverKind k);
constexpr int kManeuverCount = 5;

struct SynthParams {
    ManeuverKind kind = ManeuverKind::kStraight;
    double speed = 7.0;      // m/s at t = 0
    double yaw_rate = 0.0;   // rad/s, turns only
    double accel = 0.0;      // m/s^2, accelerate/stop profiles
    int horizon = 10;
    int history_len = 7;     // states from t = -3.0 to 0
};

// Builds one kinematically consistent clip: velocities and accelerations are
// exact backward finite differences of the analytic position profile.
UnifiedClip make_synth_clip(const SynthParams& p, const std::string& clip_id);

std::vector<UnifiedClip> synth_scenarios(int count, const std::vector<ManeuverKind>& kinds,
                                         uint64_t seed, int horizon = 10);

std::pair<std::vector<UnifiedClip>, std::vector<UnifiedClip>> split(
    std::vector<UnifiedClip> clips, double val_fraction, uint64_t seed);

}  // namespace aqp
