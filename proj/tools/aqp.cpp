#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "aqp/checkpoint.hpp"
#include "aqp/config.hpp"
#include "aqp/plot.hpp"
#include "aqp/training.hpp"

namespace {

using namespace aqp;

RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return parse_run_config("{}");
    return load_run_config(path);
}

int cmd_ingest(const std::string& source_name, const std::string& input,
               const std::string& output, int horizon) {
    auto source = source_from_name(source_name);
    if (!source) {
        std::cerr << "unknown source: " << source_name << "\n";
        return 2;
    }
    IngestReport report;
    std::vector<UnifiedClip> clips = ingest_adapter(*source, input, horizon, &report);
    std::cerr << "parsed " << report.parsed << ", dropped " << report.dropped << "\n";
    for (const auto& r : report.drop_reasons) std::cerr << "  drop: " << r << "\n";
    if (clips.empty()) {
        std::cerr << "no valid clips ingested from " << input << "\n";
        return 2;
    }
    write_corpus(output, clips);
    std::cout << "wrote " << clips.size() << " clips to " << output << "\n";
    return 0;
}

int cmd_stats(const std::string& corpus_path, const std::string& output) {
    std::vector<UnifiedClip> clips = read_corpus(corpus_path);
    TrajectoryStats stats = compute_trajectory_stats(clips);

    nlohmann::json j;
    j["horizon"] = stats.horizon;
    j["count"] = stats.count;
    j["mean"] = stats.mean;
    j["var"] = stats.var;
    std::string text = j.dump(2);
    if (!output.empty()) {
        std::ofstream out(output, std::ios::trunc);
        if (!out) throw io_error("cannot open stats output: " + output);
        out << text << "\n";
    }
    std::cout << text << "\n";

    std::map<std::string, size_t> per_source;
    for (const auto& c : clips) ++per_source[source_name(c.source)];
    std::cout << "\nclips per source:\n";
    for (const auto& [name, n] : per_source) {
        std::printf("  %-12s %zu\n", name.c_str(), n);
    }
    return 0;
}

int cmd_gen_synth(int count, uint64_t seed, int horizon, const std::string& output) {
    std::vector<ManeuverKind> kinds = {ManeuverKind::kStraight, ManeuverKind::kLeftTurn,
                                       ManeuverKind::kRightTurn, ManeuverKind::kStop,
                                       ManeuverKind::kAccelerate};
    std::vector<UnifiedClip> clips = synth_scenarios(count, kinds, seed, horizon);
    write_corpus(output, clips);
    std::cout << "wrote " << clips.size() << " synthetic clips to " << output << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& stage_name) {
    TrainStage stage = TrainStage::kBoth;
    if (stage_name == "sft") stage = TrainStage::kSft;
    else if (stage_name == "rl") stage = TrainStage::kRl;
    else if (stage_name != "both") throw contract_error("unknown stage: " + stage_name);

    std::vector<UnifiedClip> corpus = read_corpus(cfg.corpus_path);
    PipelineResult result =
        train_pipeline(corpus, cfg.model, cfg.train, cfg.reward, cfg.out_dir, stage);
    std::cout << "untrained val avg L2: " << result.untrained_val_avg_l2 << "\n";
    for (const auto& m : result.epochs) {
        std::printf("%s epoch %d: train_loss %.6g  val_avg_l2 %.6g  val_r_total %.6g\n",
                    m.stage.c_str(), m.epoch, m.train_loss, m.val_avg_l2,
                    m.val_mean_r_total);
    }
    if (!result.post_sft_path.empty()) std::cout << "post_sft: " << result.post_sft_path << "\n";
    if (!result.post_rl_path.empty()) std::cout << "post_rl: " << result.post_rl_path << "\n";
    std::cout << "metrics: " << result.metrics_path << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& mode) {
    LoadedCheckpoint lc = load_checkpoint(checkpoint);
    Model& model = *lc.model;
    std::filesystem::create_directories(cfg.out_dir);

    if (mode == "open") {
        std::vector<UnifiedClip> clips = read_corpus(cfg.corpus_path);
        model.decoder().reset_counters();
        NoGradGuard ng;
        double l1 = 0, l2 = 0, l3 = 0;
        std::vector<Traj> preds;
        for (const auto& clip : clips) {
            TrajectoryPrediction p = model.predict(clip);
            L2Metrics m = l2_at_horizons(p.waypoints, clip.actions, cfg.reward.dt);
            l1 += m.l2_1s;
            l2 += m.l2_2s;
            l3 += m.l2_3s;
            preds.push_back(p.waypoints);
        }
        double n = static_cast<double>(clips.size());
        l1 /= n; l2 /= n; l3 /= n;
        // No logged obstacles at desk scale: collision is checked against an
        // empty scene set per clip, so rates are structural zeros.
        std::vector<std::vector<ObstacleBox>> scenes(clips.size());
        CollisionRates cr = collision_rate(preds, scenes, cfg.reward.dt);

        std::ofstream csv(cfg.out_dir + "/open_loop.csv", std::ios::trunc);
        csv << "l2_1s,l2_2s,l2_3s,l2_avg,cr_1s,cr_2s,cr_3s,cr_avg\n";
        char row[256];
        std::snprintf(row, sizeof(row), "%.6f,%.6f,%.6f,%.6f,%.3f,%.3f,%.3f,%.3f\n", l1,
                      l2, l3, (l1 + l2 + l3) / 3.0, cr.cr_1s, cr.cr_2s, cr.cr_3s, cr.avg);
        csv << row;
        std::cout << "L2@1s " << l1 << "  L2@2s " << l2 << "  L2@3s " << l3 << "  avg "
                  << (l1 + l2 + l3) / 3.0 << "\n";
        std::cout << "CR@1s " << cr.cr_1s << "%  CR@2s " << cr.cr_2s << "%  CR@3s "
                  << cr.cr_3s << "%\n";
        std::cout << "decode calls: " << model.decoder().decode_count() << " for "
                  << clips.size() << " clips (single pass per clip)\n";
        for (size_t i = 0; i < std::min<size_t>(4, clips.size()); ++i) {
            write_trajectory_svg(cfg.out_dir + "/open_clip" + std::to_string(i) + ".svg",
                                 preds[i], clips[i].actions);
        }
        return 0;
    }
    if (mode == "closed") {
        NoGradGuard ng;
        Policy policy = [&](const UnifiedClip& obs) { return model.predict(obs).waypoints; };
        model.decoder().reset_counters();
        std::vector<RolloutTrace> traces;
        std::vector<ScenarioSpec> specs = default_scenarios();
        for (const auto& spec : specs) {
            for (int i = 0; i < cfg.eval.traces_per_kind; ++i) {
                RolloutTrace t = closed_loop_rollout(policy, spec, cfg.eval.replan_hz);
                write_rollout_svg(cfg.out_dir + "/closed_" + spec.name + "_" +
                                      std::to_string(i) + ".svg",
                                  t, spec.adversary);
                traces.push_back(std::move(t));
            }
        }
        ScenarioSummary summary = score_scenarios(traces);
        std::ofstream csv(cfg.out_dir + "/closed_loop.csv", std::ios::trunc);
        csv << "kind,score,collision_pct,traces\n";
        for (const auto& s : summary.per_kind) {
            char row[128];
            std::snprintf(row, sizeof(row), "%s,%.4f,%.2f,%zu\n",
                          scenario_kind_name(s.kind), s.score, s.collision_pct, s.traces);
            csv << row;
            std::cout << scenario_kind_name(s.kind) << ": score " << s.score << "  CR "
                      << s.collision_pct << "%\n";
        }
        std::cout << "avg score " << summary.avg_score << "  avg CR "
                  << summary.avg_collision_pct << "%\n";
        std::cout << "decode calls: " << model.decoder().decode_count() << " across "
                  << traces.size() << " rollouts\n";
        return 0;
    }
    throw contract_error("unknown eval mode: " + mode);
}

int cmd_plot(const RunConfig& cfg, const std::string& checkpoint, int count) {
    LoadedCheckpoint lc = load_checkpoint(checkpoint);
    std::vector<UnifiedClip> clips = read_corpus(cfg.corpus_path);
    std::filesystem::create_directories(cfg.out_dir);
    NoGradGuard ng;
    int n = std::min<int>(count, static_cast<int>(clips.size()));
    for (int i = 0; i < n; ++i) {
        TrajectoryPrediction p = lc.model->predict(clips[i]);
        write_trajectory_svg(cfg.out_dir + "/clip_" + clips[i].clip_id + ".svg",
                             p.waypoints, clips[i].actions);
    }
    std::cout << "wrote " << n << " plots to " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"action-query trajectory policy toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    int threads = 1;
    app.add_option("--config", config_path, "run-config JSON file");
    app.add_option("--threads", threads, "worker thread cap (default 1, deterministic)");

    std::string source, input, output, corpus, checkpoint;
    std::string stage = "both", mode = "open";
    int count = 100, horizon = 10;
    uint64_t seed = 7;

    auto* ingest = app.add_subcommand("ingest", "convert a source fixture to the unified corpus");
    ingest->add_option("--source", source, "dataset tag")->required();
    ingest->add_option("--input", input, "fixture path")->required();
    ingest->add_option("--output", output, "corpus JSONL path")->required();
    ingest->add_option("--horizon", horizon, "expected future steps");

    auto* stats = app.add_subcommand("stats", "trajectory statistics of a corpus");
    stats->add_option("--corpus", corpus, "corpus JSONL path")->required();
    stats->add_option("--output", output, "also write stats JSON here");

    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic corpus");
    gen->add_option("--count", count, "number of clips")->required();
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--horizon", horizon, "future steps per clip");
    gen->add_option("--output", output, "corpus JSONL path")->required();

    auto* train = app.add_subcommand("train", "SFT and/or GRPO training");
    train->add_option("--stage", stage, "sft | rl | both");
    train->add_option("--corpus", corpus, "override config corpus path");

    auto* eval = app.add_subcommand("eval", "open- or closed-loop evaluation");
    eval->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
    eval->add_option("--mode", mode, "open | closed");
    eval->add_option("--corpus", corpus, "override config corpus path");

    auto* plot = app.add_subcommand("plot", "emit trajectory SVGs for corpus clips");
    plot->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
    plot->add_option("--corpus", corpus, "override config corpus path");
    plot->add_option("--count", count, "number of clips to plot");

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    omp_set_num_threads(threads);
#else
    (void)threads;
#endif

    try {
        RunConfig cfg = load_config_or_default(config_path);
        if (!corpus.empty()) cfg.corpus_path = corpus;

        if (ingest->parsed()) return cmd_ingest(source, input, output, horizon);
        if (stats->parsed()) return cmd_stats(corpus, output);
        if (gen->parsed()) return cmd_gen_synth(count, seed, horizon, output);
        if (train->parsed()) return cmd_train(cfg, stage);
        if (eval->parsed()) return cmd_eval(cfg, checkpoint, mode);
        if (plot->parsed()) return cmd_plot(cfg, checkpoint, count);
    } catch (const numeric_error& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return 4;
    } catch (const io_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const contract_error& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return 3;
    } catch (const shape_error& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
