#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "aqp/data.hpp"

using namespace aqp;

namespace {

const std::string kFixtures = std::string(FIXTURE_DIR);

UnifiedClip straight_clip(double speed = 2.0, int horizon = 10) {
    SynthParams p;
    p.kind = ManeuverKind::kStraight;
    p.speed = speed;
    p.horizon = horizon;
    return make_synth_clip(p, "straight");
}

}  // namespace

TEST_CASE("all eight adapters ingest their fixtures") {
    struct Case {
        Source source;
        const char* file;
        size_t expect;
    };
    const Case cases[] = {
        {Source::kNavsim, "navsim.json", 2},      // third record has a short horizon
        {Source::kNuscenes, "nuscenes.json", 2},  //
        {Source::kMapillary, "mapillary.json", 2},
        {Source::kWaymo, "waymo.jsonl", 2},       // one unparseable line
        {Source::kArgoverse2, "argoverse2.jsonl", 2},
        {Source::kOnce, "once.jsonl", 1},
        {Source::kKitti, "kitti.txt", 2},         // one malformed line
        {Source::kIdd, "idd.txt", 2},
    };
    for (const auto& c : cases) {
        CAPTURE(c.file);
        IngestReport report;
        auto clips = ingest_adapter(c.source, kFixtures + "/" + c.file, 10, &report);
        CHECK(clips.size() == c.expect);
        CHECK(report.parsed == c.expect);
        for (const auto& clip : clips) {
            CHECK(clip.source == c.source);
            CHECK_FALSE(validate_clip(clip, 10).has_value());
        }
    }
}

TEST_CASE("dropped records carry a reason; missing file is an io error") {
    IngestReport report;
    auto clips = ingest_adapter(Source::kNavsim, kFixtures + "/navsim.json", 10, &report);
    CHECK(clips.size() == 2);
    REQUIRE(report.dropped == 1);
    CHECK(report.drop_reasons[0].find("horizon") != std::string::npos);
    CHECK_THROWS_AS(ingest_adapter(Source::kWaymo, "/nonexistent.jsonl", 10, nullptr),
                    io_error);
}

TEST_CASE("record with a NaN waypoint is dropped, others kept") {
    std::string path = (std::filesystem::temp_directory_path() / "nanfix.jsonl").string();
    {
        std::ofstream out(path, std::ios::trunc);
        std::string hist = R"([[-0.5,-1.0,0,2,0,0,0],[0,0,0,2,0,0,0]])";
        out << R"({"id":"good","past":)" << hist << R"(,"future":[[1,0],[2,0],[3,0]]})"
            << "\n";
        out << R"({"id":"bad","past":)" << hist << R"(,"future":[[1,0],[null,0],[3,0]]})"
            << "\n";
    }
    IngestReport report;
    auto clips = ingest_adapter(Source::kWaymo, path, 3, &report);
    REQUIRE(clips.size() == 1);
    CHECK(clips[0].clip_id == "good");
    CHECK(report.dropped == 1);
}

TEST_CASE("empty file yields an empty list, not an error") {
    std::string path = (std::filesystem::temp_directory_path() / "empty.jsonl").string();
    std::ofstream(path, std::ios::trunc);
    IngestReport report;
    auto clips = ingest_adapter(Source::kOnce, path, 10, &report);
    CHECK(clips.empty());
    CHECK(report.parsed == 0);
}

TEST_CASE("leading origin action row is stripped unless include_origin_row") {
    std::string path = (std::filesystem::temp_directory_path() / "origin.jsonl").string();
    {
        std::ofstream out(path, std::ios::trunc);
        out << R"({"id":"o1","past":[[-0.5,-1.0,0,2,0,0,0],[0,0,0,2,0,0,0]],)"
            << R"("future":[[0,0],[1,0],[2,0],[3,0]]})" << "\n";
    }
    auto stripped = ingest_adapter(Source::kWaymo, path, 3);
    REQUIRE(stripped.size() == 1);
    CHECK(stripped[0].actions.front()[0] == 1.0);

    auto kept = ingest_adapter(Source::kWaymo, path, 4, nullptr, true);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].actions.front()[0] == 0.0);
}

TEST_CASE("unified JSON round-trip preserves all fields to full precision") {
    UnifiedClip clip = straight_clip(7.123456789012345);
    clip.camera_refs = {"cam/front.jpg", "cam/rear.jpg"};
    UnifiedClip back = clip_from_json(clip_to_json(clip));
    CHECK(back.clip_id == clip.clip_id);
    CHECK(back.source == clip.source);
    REQUIRE(back.history.size() == clip.history.size());
    for (size_t i = 0; i < clip.history.size(); ++i) {
        CHECK(back.history[i].t_offset == clip.history[i].t_offset);
        CHECK(back.history[i].x == clip.history[i].x);
        CHECK(back.history[i].vx == clip.history[i].vx);
        CHECK(back.history[i].ax == clip.history[i].ax);
    }
    CHECK(back.actions == clip.actions);
    CHECK(back.reasoning_text == clip.reasoning_text);
    CHECK(back.camera_refs == clip.camera_refs);
}

TEST_CASE("corpus file round-trip") {
    auto clips = synth_scenarios(25, {ManeuverKind::kStraight, ManeuverKind::kStop}, 5);
    std::string path = (std::filesystem::temp_directory_path() / "corpus.jsonl").string();
    write_corpus(path, clips);
    auto back = read_corpus(path);
    REQUIRE(back.size() == clips.size());
    for (size_t i = 0; i < clips.size(); ++i) {
        CHECK(back[i].clip_id == clips[i].clip_id);
        CHECK(back[i].actions == clips[i].actions);
    }
}

TEST_CASE("trajectory stats: degenerate and two-point cases") {
    UnifiedClip c = straight_clip(4.0);
    auto stats1 = compute_trajectory_stats({c, c, c});
    CHECK(stats1.count == 3);
    for (int i = 0; i < stats1.horizon; ++i) {
        CHECK(stats1.mean[i][0] == doctest::Approx(c.actions[i][0]));
        CHECK(stats1.var[i][0] <= 1e-24);  // identical clips, only rounding residue
        CHECK(stats1.var[i][1] <= 1e-24);
    }

    UnifiedClip a = c, b = c;
    a.actions[3][0] = 0.0;
    b.actions[3][0] = 2.0;
    auto stats2 = compute_trajectory_stats({a, b});
    CHECK(stats2.mean[3][0] == doctest::Approx(1.0));
    CHECK(stats2.var[3][0] == doctest::Approx(1.0));  // population variance

    auto stats3 = compute_trajectory_stats({c});
    for (int i = 0; i < stats3.horizon; ++i) CHECK(stats3.var[i][0] == 0.0);
}

TEST_CASE("trajectory stats match a brute-force two-pass oracle") {
    auto clips = synth_scenarios(400,
                                 {ManeuverKind::kStraight, ManeuverKind::kLeftTurn,
                                  ManeuverKind::kRightTurn, ManeuverKind::kStop,
                                  ManeuverKind::kAccelerate},
                                 99);
    auto stats = compute_trajectory_stats(clips);
    double n = static_cast<double>(clips.size());
    for (int i = 0; i < stats.horizon; ++i) {
        for (int d = 0; d < 2; ++d) {
            double mean = 0.0;
            for (const auto& c : clips) mean += c.actions[i][d];
            mean /= n;
            double var = 0.0;
            for (const auto& c : clips) var += std::pow(c.actions[i][d] - mean, 2);
            var /= n;
            CHECK(std::fabs(stats.mean[i][d] - mean) < 1e-12);
            CHECK(std::fabs(stats.var[i][d] - var) < 1e-12);
        }
    }
    CHECK_THROWS_AS(compute_trajectory_stats({}), contract_error);
    auto mixed = clips;
    mixed[0].actions.pop_back();
    CHECK_THROWS_AS(compute_trajectory_stats(mixed), shape_error);
}

TEST_CASE("prompt rendering follows the template") {
    UnifiedClip clip = straight_clip(6.93);
    std::string prompt = render_prompt(clip);

    size_t markers = 0;
    for (size_t pos = prompt.find("(t-"); pos != std::string::npos;
         pos = prompt.find("(t-", pos + 1)) {
        ++markers;
    }
    CHECK(markers == clip.history.size());  // 7 history states -> 7 markers

    CHECK(prompt.find("(t-0.0s) [0.0, 0.0]") != std::string::npos);
    CHECK(prompt.find("(t-3.0s)") != std::string::npos);
    CHECK(prompt.find("<think>") != std::string::npos);
    CHECK(prompt.find("<answer>") != std::string::npos);
    CHECK(prompt.find("Positive x means forward direction") != std::string::npos);
    CHECK(prompt.find("Velocity: X 6.93") != std::string::npos);
}

TEST_CASE("prompt numbers carry at most two decimals with at least one") {
    CHECK(format_prompt_number(7.0) == "7.0");
    CHECK(format_prompt_number(6.93) == "6.93");
    CHECK(format_prompt_number(0.0) == "0.0");
    CHECK(format_prompt_number(-0.004) == "0.0");  // rounds to zero, no minus sign
    CHECK(format_prompt_number(-21.951) == "-21.95");
    CHECK(format_prompt_number(0.2) == "0.2");
}

TEST_CASE("straight synthetic clip matches constant-velocity kinematics") {
    UnifiedClip clip = straight_clip(7.0);
    REQUIRE(clip.actions.size() == 10);
    for (int j = 1; j <= 10; ++j) {
        CHECK(clip.actions[j - 1][0] == doctest::Approx(3.5 * j).epsilon(1e-12));
        CHECK(clip.actions[j - 1][1] == 0.0);
    }
    for (const auto& s : clip.history) {
        CHECK(s.vx == doctest::Approx(7.0).epsilon(1e-12));
        CHECK(s.ax == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("synthetic velocities and accelerations are exact backward differences") {
    for (ManeuverKind kind : {ManeuverKind::kLeftTurn, ManeuverKind::kAccelerate,
                              ManeuverKind::kStop, ManeuverKind::kRightTurn}) {
        SynthParams p;
        p.kind = kind;
        p.speed = 6.0;
        p.yaw_rate = kind == ManeuverKind::kRightTurn ? -0.08 : 0.08;
        p.accel = 1.0;
        UnifiedClip clip = make_synth_clip(p, "k");
        for (size_t i = 1; i < clip.history.size(); ++i) {
            const auto& prev = clip.history[i - 1];
            const auto& cur = clip.history[i];
            double vx = (cur.x - prev.x) / kStepSeconds;
            // velocity is the backward difference of consecutive positions
            CHECK(cur.vx == doctest::Approx(vx).epsilon(1e-9));
            double ax = (cur.vx - prev.vx) / kStepSeconds;
            CHECK(cur.ax == doctest::Approx(ax).epsilon(1e-9));
        }
    }
}

TEST_CASE("stop clips decelerate to rest inside the horizon") {
    SynthParams p;
    p.kind = ManeuverKind::kStop;
    p.speed = 6.0;
    p.accel = 2.0;
    UnifiedClip clip = make_synth_clip(p, "stop");
    double prev_step = 1e9;
    for (size_t j = 1; j < clip.actions.size(); ++j) {
        double step = std::hypot(clip.actions[j][0] - clip.actions[j - 1][0],
                                 clip.actions[j][1] - clip.actions[j - 1][1]);
        CHECK(step <= prev_step + 1e-9);
        prev_step = step;
    }
    CHECK(prev_step == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("every synthetic clip passes ingest validation and the same seed repeats") {
    std::vector<ManeuverKind> kinds = {ManeuverKind::kStraight, ManeuverKind::kLeftTurn,
                                       ManeuverKind::kRightTurn, ManeuverKind::kStop,
                                       ManeuverKind::kAccelerate};
    auto a = synth_scenarios(200, kinds, 31);
    auto b = synth_scenarios(200, kinds, 31);
    REQUIRE(a.size() == 200);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK_FALSE(validate_clip(a[i], 10).has_value());
        CHECK(a[i].actions == b[i].actions);
    }
    auto c = synth_scenarios(200, kinds, 32);
    CHECK(a[0].actions != c[0].actions);
    CHECK_THROWS_AS(synth_scenarios(3, {}, 1), contract_error);
}

TEST_CASE("split is disjoint, exhaustive and deterministic") {
    auto clips = synth_scenarios(10, {ManeuverKind::kStraight}, 8);
    auto [train, val] = split(clips, 0.2, 77);
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);
    std::set<std::string> ids;
    for (const auto& c : train) ids.insert(c.clip_id);
    for (const auto& c : val) ids.insert(c.clip_id);
    CHECK(ids.size() == 10);

    auto [train2, val2] = split(clips, 0.2, 77);
    CHECK(val2[0].clip_id == val[0].clip_id);
    CHECK_THROWS_AS(split(clips, 1.5, 1), contract_error);
}

TEST_CASE("validation rejects broken clips with a reason") {
    UnifiedClip clip = straight_clip();
    UnifiedClip bad = clip;
    bad.history.back().x = 0.5;  // t = 0 not at origin
    CHECK(validate_clip(bad, 10).has_value());
    bad = clip;
    bad.history[0].t_offset = -2.7;  // off the grid
    CHECK(validate_clip(bad, 10).has_value());
    bad = clip;
    bad.actions[2][0] = std::nan("");
    CHECK(validate_clip(bad, 10).has_value());
    bad = clip;
    bad.actions[1][1] = 5000.0;  // outside sanity bound
    CHECK(validate_clip(bad, 10).has_value());
    CHECK_FALSE(validate_clip(clip, 10).has_value());
}
