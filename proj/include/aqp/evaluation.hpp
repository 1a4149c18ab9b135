#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aqp/data.hpp"
#include "aqp/rewards.hpp"

namespace aqp {

// Ego footprint used by all collision geometry (meters, half-extents).
constexpr double kEgoHalfLength = 2.0;
constexpr double kEgoHalfWidth = 0.9;

struct L2Metrics {
    double l2_1s = 0.0;
    double l2_2s = 0.0;
    double l2_3s = 0.0;
    double avg = 0.0;
};

L2Metrics l2_at_horizons(const Traj& pred, const Traj& gt, double dt);

// Axis-aligned box trajectory on the 0.5 s grid; centers[k] holds the box
// center at time (k+1)*dt for open-loop checks, or k*dt inside rollouts.
struct ObstacleBox {
    std::vector<std::array<double, 2>> centers;
    double half_length = 2.25;
    double half_width = 0.9;
};

struct CollisionRates {
    double cr_1s = 0.0;  // percentages
    double cr_2s = 0.0;
    double cr_3s = 0.0;
    double avg = 0.0;
};

// A clip collides at horizon k if any waypoint with time <= k s lies inside
// any obstacle box (inflated by the ego half-extents) at that timestep.
CollisionRates collision_rate(const std::vector<Traj>& preds,
                              const std::vector<std::vector<ObstacleBox>>& scenes,
                              double dt);

enum class ScenarioKind { kStationary, kFrontal, kSide };
const char* scenario_kind_name(ScenarioKind k);

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::kStationary;
    double ego_speed = 6.0;       // initial speed, straight history
    ObstacleBox adversary;        // one center per rollout tick
    double duration = 5.0;        // seconds
    double reference_speed = 5.0; // closing speed at t = 0; scales the score
    std::string name;
};

struct RolloutTrace {
    std::vector<std::array<double, 2>> ego_path;       // global frame, per tick
    std::vector<std::array<double, 2>> adversary_path;
    bool collided = false;
    std::optional<double> impact_speed;  // m/s, relative, present iff collided
    int replan_count = 0;
    bool valid = true;
    ScenarioKind kind = ScenarioKind::kStationary;
    double reference_speed = 5.0;
};

// Maps an observation (UnifiedClip shape, current ego frame) to H waypoints.
using Policy = std::function<Traj(const UnifiedClip&)>;

// Unicycle rollout with steering clamped to 40 deg per tick and acceleration
// to 6 m/s^2. The observation is rebuilt from the rolled state history in the
// current ego frame at every replan tick.
RolloutTrace closed_loop_rollout(const Policy& policy, const ScenarioSpec& scenario,
                                 double replan_hz, int history_len = 7,
                                 double dt = kStepSeconds);

struct ScenarioScore {
    ScenarioKind kind = ScenarioKind::kStationary;
    double score = 0.0;          // mean over traces, 0..5
    double collision_pct = 0.0;
    size_t traces = 0;
};

struct ScenarioSummary {
    std::vector<ScenarioScore> per_kind;
    double avg_score = 0.0;      // mean over all traces
    double avg_collision_pct = 0.0;
};

// Per-trace score: 5 if clean, else 5 * max(0, 1 - impact_speed / reference).
ScenarioSummary score_scenarios(const std::vector<RolloutTrace>& traces);

// The three scripted scenario kinds, one spec per kind.
std::vector<ScenarioSpec> default_scenarios();

}  // namespace aqp
