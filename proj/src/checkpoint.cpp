#include "aqp/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace aqp {

namespace {

constexpr char kMagic[8] = {'A', 'Q', 'P', 'C', 'K', 'P', 'T', '1'};

nlohmann::json stats_to_json(const TrajectoryStats& stats) {
    nlohmann::json j;
    j["horizon"] = stats.horizon;
    j["count"] = stats.count;
    j["mean"] = stats.mean;
    j["var"] = stats.var;
    return j;
}

TrajectoryStats stats_from_json(const nlohmann::json& j) {
    TrajectoryStats s;
    s.horizon = j.at("horizon").get<int>();
    s.count = j.at("count").get<size_t>();
    s.mean = j.at("mean").get<std::vector<std::array<double, 2>>>();
    s.var = j.at("var").get<std::vector<std::array<double, 2>>>();
    return s;
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["encoder"] = {{"layers", cfg.encoder.layers},
                    {"heads", cfg.encoder.heads},
                    {"d_model", cfg.encoder.d_model},
                    {"d_ff", cfg.encoder.d_ff},
                    {"time_freqs", cfg.encoder.time_freqs}};
    j["decoder"] = {{"blocks", cfg.decoder.blocks},
                    {"heads", cfg.decoder.heads},
                    {"d_ff", cfg.decoder.d_ff},
                    {"refine_source_layer", cfg.decoder.refine_source_layer},
                    {"log_std_init", cfg.decoder.log_std_init},
                    {"log_std_min", cfg.decoder.log_std_min},
                    {"log_std_max", cfg.decoder.log_std_max}};
    j["horizon"] = cfg.horizon;
    j["query_var_floor"] = cfg.query_var_floor;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    const auto& e = j.at("encoder");
    cfg.encoder.layers = e.at("layers").get<int>();
    cfg.encoder.heads = e.at("heads").get<int>();
    cfg.encoder.d_model = e.at("d_model").get<int>();
    cfg.encoder.d_ff = e.at("d_ff").get<int>();
    cfg.encoder.time_freqs = e.at("time_freqs").get<int>();
    const auto& d = j.at("decoder");
    cfg.decoder.blocks = d.at("blocks").get<int>();
    cfg.decoder.heads = d.at("heads").get<int>();
    cfg.decoder.d_ff = d.at("d_ff").get<int>();
    cfg.decoder.refine_source_layer = d.at("refine_source_layer").get<int>();
    cfg.decoder.log_std_init = d.at("log_std_init").get<double>();
    cfg.decoder.log_std_min = d.at("log_std_min").get<double>();
    cfg.decoder.log_std_max = d.at("log_std_max").get<double>();
    cfg.horizon = j.at("horizon").get<int>();
    cfg.query_var_floor = j.at("query_var_floor").get<double>();
    return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const TrajectoryStats& stats, const std::string& stage) {
    nlohmann::json header;
    header["version"] = 1;
    header["stage"] = stage;
    header["model"] = model_config_to_json(model.config());
    header["stats"] = stats_to_json(stats);
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& [name, t] : model.params().items()) {
        manifest.push_back({{"name", name}, {"shape", t.shape()}});
    }
    header["params"] = manifest;
    std::string hdr = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    uint64_t hlen = hdr.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    for (const auto& [name, t] : model.params().items()) {
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) throw io_error("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw io_error("not a checkpoint file: " + path);
    }
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hdr(hlen, '\0');
    in.read(hdr.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw io_error("truncated checkpoint header: " + path);
    nlohmann::json header = nlohmann::json::parse(hdr);
    if (header.at("version").get<int>() != 1) {
        throw io_error("unsupported checkpoint version in " + path);
    }

    LoadedCheckpoint lc;
    lc.stage = header.at("stage").get<std::string>();
    lc.stats = stats_from_json(header.at("stats"));
    ModelConfig cfg = model_config_from_json(header.at("model"));
    lc.model = std::make_unique<Model>(cfg, lc.stats, /*seed=*/0);

    const auto& manifest = header.at("params");
    const auto& items = lc.model->params().items();
    if (manifest.size() != items.size()) {
        throw io_error("checkpoint parameter manifest mismatch: " + path);
    }
    for (size_t i = 0; i < items.size(); ++i) {
        if (manifest[i].at("name").get<std::string>() != items[i].first ||
            manifest[i].at("shape").get<std::vector<int>>() != items[i].second.shape()) {
            throw io_error("checkpoint parameter mismatch at " + items[i].first);
        }
        Tensor t = items[i].second;
        in.read(reinterpret_cast<char*>(t.mutable_data().data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!in) throw io_error("truncated checkpoint blob: " + path);
    return lc;
}

}  // namespace aqp
