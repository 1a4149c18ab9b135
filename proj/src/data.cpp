#include "aqp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace aqp {

using nlohmann::json;

namespace {
constexpr double kCoordBound = 1000.0;  // sanity bound on |x|, |y|
}

const char* source_name(Source s) {
    switch (s) {
        case Source::kNavsim: return "navsim";
        case Source::kNuscenes: return "nuscenes";
        case Source::kWaymo: return "waymo";
        case Source::kArgoverse2: return "argoverse2";
        case Source::kKitti: return "kitti";
        case Source::kMapillary: return "mapillary";
        case Source::kOnce: return "once";
        case Source::kIdd: return "idd";
    }
    return "unknown";
}

std::optional<Source> source_from_name(const std::string& name) {
    static const Source all[] = {Source::kNavsim,    Source::kNuscenes, Source::kWaymo,
                                 Source::kArgoverse2, Source::kKitti,    Source::kMapillary,
                                 Source::kOnce,      Source::kIdd};
    for (Source s : all) {
        if (name == source_name(s)) return s;
    }
    return std::nullopt;
}

const char* maneuver_name(ManeuverKind k) {
    switch (k) {
        case ManeuverKind::kStraight: return "straight";
        case ManeuverKind::kLeftTurn: return "left-turn";
        case ManeuverKind::kRightTurn: return "right-turn";
        case ManeuverKind::kStop: return "stop";
        case ManeuverKind::kAccelerate: return "accelerate";
    }
    return "unknown";
}

// ---- validation ----

std::optional<std::string> validate_clip(const UnifiedClip& clip, int expected_horizon) {
    if (clip.clip_id.empty()) return "empty clip_id";
    if (clip.history.empty()) return "empty history";
    double prev_t = -1e18;
    for (const auto& s : clip.history) {
        double grid = s.t_offset / kStepSeconds;
        if (s.t_offset > 1e-9) return "positive t_offset in history";
        if (std::abs(grid - std::round(grid)) > 1e-6) return "t_offset off the 0.5 s grid";
        if (s.t_offset <= prev_t) return "history not time-ordered";
        prev_t = s.t_offset;
        for (double v : {s.x, s.y, s.vx, s.vy, s.ax, s.ay}) {
            if (!std::isfinite(v)) return "non-finite history value";
        }
    }
    const auto& last = clip.history.back();
    if (std::abs(last.t_offset) > 1e-9) return "history does not end at t = 0";
    if (std::abs(last.x) > 1e-9 || std::abs(last.y) > 1e-9) {
        return "state at t = 0 is not at the ego-frame origin";
    }
    if (static_cast<int>(clip.actions.size()) != expected_horizon) {
        return "wrong action horizon";
    }
    for (const auto& wp : clip.actions) {
        for (double v : wp) {
            if (!std::isfinite(v)) return "non-finite waypoint";
            if (std::abs(v) >= kCoordBound) return "waypoint outside sanity bound";
        }
    }
    return std::nullopt;
}

// ---- unified JSON format ----

std::string clip_to_json(const UnifiedClip& clip) {
    json j;
    j["clip_id"] = clip.clip_id;
    j["source"] = source_name(clip.source);
    json hist = json::array();
    for (const auto& s : clip.history) {
        hist.push_back({{"t", s.t_offset},
                        {"x", s.x},
                        {"y", s.y},
                        {"vx", s.vx},
                        {"vy", s.vy},
                        {"ax", s.ax},
                        {"ay", s.ay}});
    }
    j["history"] = std::move(hist);
    json acts = json::array();
    for (const auto& wp : clip.actions) acts.push_back({wp[0], wp[1]});
    j["actions"] = std::move(acts);
    if (clip.reasoning_text) {
        j["reasoning_text"] = *clip.reasoning_text;
    } else {
        j["reasoning_text"] = nullptr;
    }
    j["camera_refs"] = clip.camera_refs;
    return j.dump();
}

UnifiedClip clip_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    UnifiedClip clip;
    clip.clip_id = j.at("clip_id").get<std::string>();
    auto src = source_from_name(j.at("source").get<std::string>());
    if (!src) throw io_error("unknown source tag in clip JSON");
    clip.source = *src;
    for (const auto& s : j.at("history")) {
        EgoState st;
        st.t_offset = s.at("t").get<double>();
        st.x = s.at("x").get<double>();
        st.y = s.at("y").get<double>();
        st.vx = s.at("vx").get<double>();
        st.vy = s.at("vy").get<double>();
        st.ax = s.at("ax").get<double>();
        st.ay = s.at("ay").get<double>();
        clip.history.push_back(st);
    }
    for (const auto& wp : j.at("actions")) {
        clip.actions.push_back({wp.at(0).get<double>(), wp.at(1).get<double>()});
    }
    if (j.contains("reasoning_text") && !j["reasoning_text"].is_null()) {
        clip.reasoning_text = j["reasoning_text"].get<std::string>();
    }
    if (j.contains("camera_refs")) {
        clip.camera_refs = j["camera_refs"].get<std::vector<std::string>>();
    }
    return clip;
}

void write_corpus(const std::string& path, const std::vector<UnifiedClip>& clips) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    for (const auto& c : clips) out << clip_to_json(c) << '\n';
    if (!out) throw io_error("write failed: " + path);
}

std::vector<UnifiedClip> read_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open corpus: " + path);
    std::vector<UnifiedClip> clips;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        clips.push_back(clip_from_json(line));
    }
    return clips;
}

// ---- adapters ----

namespace {

void note_drop(IngestReport* report, const std::string& reason) {
    if (report) {
        ++report->dropped;
        report->drop_reasons.push_back(reason);
    }
}

EgoState state_from_row(const std::vector<double>& row) {
    if (row.size() != 7) throw io_error("history row must have 7 fields");
    return EgoState{row[0], row[1], row[2], row[3], row[4], row[5], row[6]};
}

// Shared core: candidate fields already extracted from the source layout.
struct RawRecord {
    std::string id;
    std::vector<std::vector<double>> history;   // rows of t x y vx vy ax ay
    std::vector<std::array<double, 2>> actions;
    std::optional<std::string> reasoning;
};

// Whether a leading [0, 0] action row (the current pose, present in some
// source conventions) counts toward the horizon; see ingest_adapter.
thread_local bool g_include_origin_row = false;

std::optional<UnifiedClip> finalize_record(const RawRecord& raw, Source source,
                                           int expected_horizon, IngestReport* report) {
    UnifiedClip clip;
    clip.clip_id = raw.id;
    clip.source = source;
    clip.actions = raw.actions;
    if (!g_include_origin_row && clip.actions.size() ==
                                     static_cast<size_t>(expected_horizon) + 1 &&
        std::abs(clip.actions[0][0]) < 1e-9 && std::abs(clip.actions[0][1]) < 1e-9) {
        clip.actions.erase(clip.actions.begin());
    }
    clip.reasoning_text = raw.reasoning;
    try {
        for (const auto& row : raw.history) clip.history.push_back(state_from_row(row));
    } catch (const io_error& e) {
        note_drop(report, raw.id + ": " + e.what());
        return std::nullopt;
    }
    if (auto reason = validate_clip(clip, expected_horizon)) {
        note_drop(report, raw.id + ": " + *reason);
        return std::nullopt;
    }
    if (report) ++report->parsed;
    return clip;
}

std::vector<std::vector<double>> rows_from_json(const json& arr) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : arr) {
        std::vector<double> row;
        if (r.is_array()) {
            for (const auto& v : r) row.push_back(v.get<double>());
        } else {
            for (const char* key : {"t", "x", "y", "vx", "vy", "ax", "ay"}) {
                row.push_back(r.at(key).get<double>());
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::array<double, 2>> waypoints_from_json(const json& arr) {
    std::vector<std::array<double, 2>> wps;
    for (const auto& r : arr) {
        wps.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
    }
    return wps;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open fixture: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// JSON-object / JSON-array layouts. Field names vary per source.
struct JsonFieldMap {
    const char* id;
    const char* history;
    const char* actions;
    const char* reasoning;  // nullptr when the schema has none
};

std::vector<UnifiedClip> ingest_json_records(const json& records, Source source,
                                             const JsonFieldMap& fields, int expected_horizon,
                                             IngestReport* report) {
    std::vector<UnifiedClip> clips;
    for (const auto& rec : records) {
        RawRecord raw;
        try {
            raw.id = rec.at(fields.id).get<std::string>();
            raw.history = rows_from_json(rec.at(fields.history));
            raw.actions = waypoints_from_json(rec.at(fields.actions));
            if (fields.reasoning && rec.contains(fields.reasoning) &&
                !rec[fields.reasoning].is_null()) {
                raw.reasoning = rec[fields.reasoning].get<std::string>();
            }
        } catch (const json::exception& e) {
            note_drop(report, std::string("malformed record: ") + e.what());
            continue;
        }
        if (auto clip = finalize_record(raw, source, expected_horizon, report)) {
            clips.push_back(std::move(*clip));
        }
    }
    return clips;
}

std::vector<UnifiedClip> ingest_jsonl(const std::string& path, Source source,
                                      const JsonFieldMap& fields, int expected_horizon,
                                      IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open fixture: " + path);
    std::vector<UnifiedClip> clips;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            note_drop(report, std::string("unparseable line: ") + e.what());
            continue;
        }
        json arr = json::array({rec});
        auto one = ingest_json_records(arr, source, fields, expected_horizon, report);
        clips.insert(clips.end(), one.begin(), one.end());
    }
    return clips;
}

std::vector<double> parse_doubles(const std::string& text) {
    std::istringstream ss(text);
    std::vector<double> out;
    double v;
    while (ss >> v) out.push_back(v);
    return out;
}

// kitti fixture: one record per line, "id | t x y vx vy ax ay ; ... | x y ; x y ; ..."
std::vector<UnifiedClip> ingest_kitti(const std::string& path, int expected_horizon,
                                      IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open fixture: " + path);
    std::vector<UnifiedClip> clips;
    std::string line;
    auto split_on = [](const std::string& s, char sep) {
        std::vector<std::string> parts;
        std::istringstream ss(s);
        std::string item;
        while (std::getline(ss, item, sep)) parts.push_back(item);
        return parts;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto sections = split_on(line, '|');
        if (sections.size() != 3) {
            note_drop(report, "line does not have 3 '|' sections");
            continue;
        }
        RawRecord raw;
        raw.id = sections[0];
        raw.id.erase(raw.id.find_last_not_of(" \t") + 1);
        raw.id.erase(0, raw.id.find_first_not_of(" \t"));
        bool bad = false;
        for (const auto& st : split_on(sections[1], ';')) {
            auto row = parse_doubles(st);
            if (row.empty()) continue;
            raw.history.push_back(row);
        }
        for (const auto& wp : split_on(sections[2], ';')) {
            auto vals = parse_doubles(wp);
            if (vals.empty()) continue;
            if (vals.size() != 2) {
                bad = true;
                break;
            }
            raw.actions.push_back({vals[0], vals[1]});
        }
        if (bad) {
            note_drop(report, raw.id + ": waypoint does not have 2 fields");
            continue;
        }
        if (auto clip = finalize_record(raw, Source::kKitti, expected_horizon, report)) {
            clips.push_back(std::move(*clip));
        }
    }
    return clips;
}

// idd fixture: blank-line separated blocks of "# id" / "S t x y vx vy ax ay" / "W x y".
std::vector<UnifiedClip> ingest_idd(const std::string& path, int expected_horizon,
                                    IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open fixture: " + path);
    std::vector<UnifiedClip> clips;
    RawRecord raw;
    bool in_block = false;
    auto flush = [&]() {
        if (!in_block) return;
        if (auto clip = finalize_record(raw, Source::kIdd, expected_horizon, report)) {
            clips.push_back(std::move(*clip));
        }
        raw = RawRecord{};
        in_block = false;
    };
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            flush();
            continue;
        }
        if (line.rfind("# ", 0) == 0) {
            flush();
            raw.id = line.substr(2);
            in_block = true;
        } else if (line.rfind("S ", 0) == 0) {
            raw.history.push_back(parse_doubles(line.substr(2)));
        } else if (line.rfind("W ", 0) == 0) {
            auto vals = parse_doubles(line.substr(2));
            if (vals.size() == 2) {
                raw.actions.push_back({vals[0], vals[1]});
            } else {
                raw.actions.push_back(
                    {std::numeric_limits<double>::quiet_NaN(), 0.0});  // dropped later
            }
        }
    }
    flush();
    return clips;
}

}  // namespace

std::vector<UnifiedClip> ingest_adapter(Source source, const std::string& path,
                                        int expected_horizon, IngestReport* report,
                                        bool include_origin_row) {
    g_include_origin_row = include_origin_row;
    switch (source) {
        case Source::kNavsim: {
            json doc = json::parse(read_file(path));
            return ingest_json_records(doc.at("clips"), source,
                                       {"id", "history", "future", nullptr},
                                       expected_horizon, report);
        }
        case Source::kNuscenes: {
            json doc = json::parse(read_file(path));
            return ingest_json_records(doc, source,
                                       {"clip_id", "ego_history", "actions", "reasoning"},
                                       expected_horizon, report);
        }
        case Source::kMapillary: {
            json doc = json::parse(read_file(path));
            return ingest_json_records(doc, source, {"key", "states", "track", nullptr},
                                       expected_horizon, report);
        }
        case Source::kWaymo:
            return ingest_jsonl(path, source, {"id", "past", "future", nullptr},
                                expected_horizon, report);
        case Source::kArgoverse2:
            return ingest_jsonl(path, source, {"log_id", "history", "waypoints", nullptr},
                                expected_horizon, report);
        case Source::kOnce:
            return ingest_jsonl(path, source, {"clip", "hist", "acts", nullptr},
                                expected_horizon, report);
        case Source::kKitti:
            return ingest_kitti(path, expected_horizon, report);
        case Source::kIdd:
            return ingest_idd(path, expected_horizon, report);
    }
    throw contract_error("ingest_adapter: unknown source");
}

// ---- statistics ----

TrajectoryStats compute_trajectory_stats(const std::vector<UnifiedClip>& clips) {
    if (clips.empty()) throw contract_error("compute_trajectory_stats: empty corpus");
    size_t h = clips[0].actions.size();
    for (const auto& c : clips) {
        if (c.actions.size() != h) {
            throw shape_error("compute_trajectory_stats: mixed horizons");
        }
    }
    TrajectoryStats stats;
    stats.horizon = static_cast<int>(h);
    stats.count = clips.size();
    stats.mean.assign(h, {0.0, 0.0});
    stats.var.assign(h, {0.0, 0.0});
    double inv = 1.0 / static_cast<double>(clips.size());
    for (const auto& c : clips) {
        for (size_t i = 0; i < h; ++i) {
            stats.mean[i][0] += c.actions[i][0] * inv;
            stats.mean[i][1] += c.actions[i][1] * inv;
        }
    }
    for (const auto& c : clips) {
        for (size_t i = 0; i < h; ++i) {
            for (int n = 0; n < 2; ++n) {
                double d = c.actions[i][n] - stats.mean[i][n];
                stats.var[i][n] += d * d * inv;
            }
        }
    }
    return stats;
}

// ---- prompt rendering ----

std::string format_prompt_number(double v) {
    double r = std::round(v * 100.0) / 100.0;
    if (r == 0.0) r = 0.0;  // normalize -0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", r);
    std::string s(buf);
    if (s.back() == '0') s.pop_back();  // "0.00" -> "0.0", "6.90" -> "6.9"
    return s;
}

std::string render_prompt(const UnifiedClip& clip) {
    std::ostringstream out;
    size_t hlen = clip.history.size();
    double span = (hlen - 1) * kStepSeconds;
    int horizon = static_cast<int>(clip.actions.size());
    double horizon_secs = horizon * kStepSeconds;
    char buf[64];

    out << "You are a helpful assistant\n";
    out << "You are an autonomous driving agent. Your task is to do your best to "
           "predict future waypoints for the vehicle over the next "
        << horizon
        << " timesteps, given the vehicle's intent inferred from its recent motion. "
           "Provided are the previous ego vehicle status recorded over the last ";
    std::snprintf(buf, sizeof(buf), "%.1f", span);
    out << buf
        << " seconds (at 0.5-second intervals). This includes the x and y coordinates "
           "of the ego vehicle. Positive x means forward direction while positive y "
           "means leftwards. The data is presented in the format [x, y]:";
    for (const auto& s : clip.history) {
        double back = -s.t_offset;
        if (back == 0.0) back = 0.0;  // avoid "(t--0.0s)"
        std::snprintf(buf, sizeof(buf), "%.1f", back);
        out << "(t-" << buf << "s) [" << format_prompt_number(s.x) << ", "
            << format_prompt_number(s.y) << "], Acceleration: X " << format_prompt_number(s.ax)
            << ", Y " << format_prompt_number(s.ay) << " m/s^2, Velocity: X "
            << format_prompt_number(s.vx) << ", Y " << format_prompt_number(s.vy) << " m/s, ";
    }
    out << "\n\nPlease think deeply. Engage in an internal dialogue as a reasoning "
           "process. Provide your reasoning between the <think> </think> tags, and "
           "then give your answer between the <answer> </answer> tags. Predicted "
           "future movement details for the next ";
    std::snprintf(buf, sizeof(buf), "%g", horizon_secs);
    out << buf
        << " seconds (sampled at 0.5-second intervals), including BEV location in x "
           "and y directions (in meters). Positive x means forward direction while "
           "positive y means leftwards. The output is formatted as [x, y].";
    return out.str();
}

// ---- synthetic scenarios ----

namespace {

// Analytic position profile sampled on the 0.5 s grid.
struct Profile {
    ManeuverKind kind;
    double v, yaw_rate, accel;

    std::array<double, 2> pos(double t) const {
        switch (kind) {
            case ManeuverKind::kStraight:
                return {v * t, 0.0};
            case ManeuverKind::kAccelerate:
                return {v * t + 0.5 * accel * t * t, 0.0};
            case ManeuverKind::kStop: {
                // braking starts at t = -1 s so the maneuver shows in the history
                const double tb = -1.0;
                if (t <= tb) return {v * t, 0.0};
                double ts = std::min(t - tb, v / accel);  // time under braking
                return {v * tb + v * ts - 0.5 * accel * ts * ts, 0.0};
            }
            case ManeuverKind::kLeftTurn:
            case ManeuverKind::kRightTurn: {
                // constant-speed arc: heading = yaw_rate * t, valid for t < 0 too
                double w = yaw_rate;  // signed; > 0 turns left
                return {(v / w) * std::sin(w * t), (v / w) * (1.0 - std::cos(w * t))};
            }
        }
        return {0.0, 0.0};
    }
};

}  // namespace

UnifiedClip make_synth_clip(const SynthParams& p, const std::string& clip_id) {
    if (p.horizon < 3) throw contract_error("make_synth_clip: horizon too short");
    if (p.history_len < 2) throw contract_error("make_synth_clip: history too short");
    Profile prof{p.kind, p.speed, p.yaw_rate, p.accel};

    // Two extra steps before the earliest history state so velocities and
    // accelerations come out as exact backward finite differences.
    int pre = p.history_len + 1;
    std::vector<std::array<double, 2>> grid;  // t = -(pre)*dt .. horizon*dt
    for (int k = -pre; k <= p.horizon; ++k) {
        grid.push_back(prof.pos(k * kStepSeconds));
    }
    // re-anchor the ego frame: position at t = 0 must be the origin
    auto origin = grid[static_cast<size_t>(pre)];
    for (auto& g : grid) {
        g[0] -= origin[0];
        g[1] -= origin[1];
    }
    auto at = [&](int k) { return grid[static_cast<size_t>(k + pre)]; };

    UnifiedClip clip;
    clip.clip_id = clip_id;
    clip.source = Source::kNuscenes;  // synthetic clips carry a neutral tag
    for (int k = -(p.history_len - 1); k <= 0; ++k) {
        EgoState s;
        s.t_offset = k * kStepSeconds;
        auto pk = at(k), pm1 = at(k - 1), pm2 = at(k - 2);
        s.x = pk[0];
        s.y = pk[1];
        s.vx = (pk[0] - pm1[0]) / kStepSeconds;
        s.vy = (pk[1] - pm1[1]) / kStepSeconds;
        s.ax = (pk[0] - 2.0 * pm1[0] + pm2[0]) / (kStepSeconds * kStepSeconds);
        s.ay = (pk[1] - 2.0 * pm1[1] + pm2[1]) / (kStepSeconds * kStepSeconds);
        clip.history.push_back(s);
    }
    for (int k = 1; k <= p.horizon; ++k) {
        clip.actions.push_back(at(k));
    }
    std::ostringstream think;
    think << "<think>The ego vehicle follows a " << maneuver_name(p.kind)
          << " profile at " << format_prompt_number(p.speed)
          << " m/s; extrapolating the recent motion yields the waypoints below.</think>";
    clip.reasoning_text = think.str();
    return clip;
}

std::vector<UnifiedClip> synth_scenarios(int count, const std::vector<ManeuverKind>& kinds,
                                         uint64_t seed, int horizon) {
    if (count < 1) throw contract_error("synth_scenarios: count must be >= 1");
    if (kinds.empty()) throw contract_error("synth_scenarios: empty kind set");
    Rng rng = Rng::substream(seed, "synth");
    std::vector<UnifiedClip> clips;
    clips.reserve(static_cast<size_t>(count));
    double horizon_secs = horizon * kStepSeconds;
    for (int i = 0; i < count; ++i) {
        SynthParams p;
        p.kind = kinds[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(kinds.size()) - 1))];
        p.horizon = horizon;
        switch (p.kind) {
            case ManeuverKind::kStraight:
                p.speed = rng.uniform(3.0, 12.0);
                break;
            case ManeuverKind::kAccelerate:
                p.speed = rng.uniform(3.0, 10.0);
                // keep speed positive back to t = -4.5 s and |acc| well under limit
                p.accel = rng.uniform(0.3, std::min(1.5, (p.speed - 0.5) / 4.5));
                break;
            case ManeuverKind::kStop:
                p.speed = rng.uniform(3.0, 10.0);
                // braking starts 1 s before t = 0; stop fully inside the horizon
                // and keep the decel well under the 6 m/s^2 limit
                p.accel = rng.uniform(std::max(0.9, p.speed / (horizon_secs + 0.5)),
                                      std::min(4.0, p.speed));
                break;
            case ManeuverKind::kLeftTurn:
                p.speed = rng.uniform(3.0, 10.0);
                p.yaw_rate = rng.uniform(0.04, 0.10);
                break;
            case ManeuverKind::kRightTurn:
                p.speed = rng.uniform(3.0, 10.0);
                p.yaw_rate = -rng.uniform(0.04, 0.10);
                break;
        }
        std::ostringstream id;
        id << "synth_" << maneuver_name(p.kind) << "_" << i;
        clips.push_back(make_synth_clip(p, id.str()));
    }
    return clips;
}

// ---- split ----

std::pair<std::vector<UnifiedClip>, std::vector<UnifiedClip>> split(
    std::vector<UnifiedClip> clips, double val_fraction, uint64_t seed) {
    if (clips.size() < 2) throw contract_error("split: need at least 2 clips");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw contract_error("split: val_fraction must lie in (0, 1)");
    }
    Rng rng = Rng::substream(seed, "split");
    rng.shuffle(clips);
    size_t val_n = static_cast<size_t>(clips.size() * val_fraction);
    val_n = std::max<size_t>(1, std::min(val_n, clips.size() - 1));
    std::vector<UnifiedClip> val(clips.end() - static_cast<long>(val_n), clips.end());
    clips.resize(clips.size() - val_n);
    return {std::move(clips), std::move(val)};
}

}  // namespace aqp
