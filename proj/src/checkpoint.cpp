#include "diffroll/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "diffroll/arrayio.hpp"

namespace diffroll {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'D', 'R', 'C', 'K'};
constexpr uint32_t kVersion = 1;

json config_to_json(const DenoiserConfig& c) {
    return json{{"residual_channels", c.residual_channels},
                {"num_layers", c.num_layers},
                {"kernel_size", c.kernel_size},
                {"dilation_pattern", c.dilation_pattern},
                {"mel_bins", c.mel_bins},
                {"roll_channels", c.roll_channels},
                {"time_embed_dim", c.time_embed_dim},
                {"max_timestep", c.max_timestep}};
}

DenoiserConfig config_from_json(const json& j) {
    DenoiserConfig c;
    c.residual_channels = j.at("residual_channels");
    c.num_layers = j.at("num_layers");
    c.kernel_size = j.at("kernel_size");
    c.dilation_pattern = j.at("dilation_pattern").get<std::vector<int>>();
    c.mel_bins = j.at("mel_bins");
    c.roll_channels = j.at("roll_channels");
    c.time_embed_dim = j.at("time_embed_dim");
    c.max_timestep = j.at("max_timestep");
    return c;
}

json features_to_json(const FeatureConfig& f) {
    return json{{"sample_rate", f.sample_rate}, {"hop_length", f.hop_length},
                {"window_size", f.window_size}, {"mel_bins", f.mel_bins},
                {"fmin_hz", f.fmin_hz},         {"fmax_hz", f.fmax_hz},
                {"log_floor", f.log_floor},     {"log_lo", f.log_lo},
                {"log_hi", f.log_hi}};
}

FeatureConfig features_from_json(const json& j) {
    FeatureConfig f;
    f.sample_rate = j.at("sample_rate");
    f.hop_length = j.at("hop_length");
    f.window_size = j.at("window_size");
    f.mel_bins = j.at("mel_bins");
    f.fmin_hz = j.at("fmin_hz");
    f.fmax_hz = j.at("fmax_hz");
    f.log_floor = j.at("log_floor");
    f.log_lo = j.at("log_lo");
    f.log_hi = j.at("log_hi");
    return f;
}

}  // namespace

void save_checkpoint(const std::string& path, const DiffRollNetF& model,
                     const NoiseSchedule& schedule, const FeatureConfig& features,
                     const Provenance& prov, const TrainState* train_state) {
    json header;
    header["version"] = kVersion;
    header["model"] = config_to_json(model.config());
    header["schedule"] = {{"steps", schedule.steps()},
                          {"table", schedule.to_table_text()}};
    header["features"] = features_to_json(features);
    header["provenance"] = {{"created_by", prov.created_by},
                            {"seed", prov.seed},
                            {"dropout_p", prov.dropout_p},
                            {"scheme", prov.scheme},
                            {"steps", prov.steps},
                            {"discriminative", prov.discriminative}};

    json dir = json::array();
    size_t offset = 0;
    for (const Tensor<float>* t : model.tensors()) {
        dir.push_back({{"name", t->name}, {"shape", t->shape}, {"offset", offset}});
        offset += t->size() * sizeof(float);
    }
    header["tensors"] = dir;
    header["blob_bytes"] = offset;

    if (train_state) {
        header["train_state"] = {
            {"adam_steps", train_state->adam_steps},
            {"rng", {hex64(train_state->rng_state[0]), hex64(train_state->rng_state[1]),
                     hex64(train_state->rng_state[2]), hex64(train_state->rng_state[3]),
                     hex64(train_state->rng_state[4]), hex64(train_state->rng_state[5])}}};
    }

    const std::string head = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write checkpoint: " + path);
    f.write(kMagic, 4);
    const uint32_t ver = kVersion;
    f.write(reinterpret_cast<const char*>(&ver), 4);
    const uint64_t head_len = head.size();
    f.write(reinterpret_cast<const char*>(&head_len), 8);
    f.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const Tensor<float>* t : model.tensors())
        f.write(reinterpret_cast<const char*>(t->w.data()),
                static_cast<std::streamsize>(t->size() * sizeof(float)));
    if (train_state) {
        for (const auto& m : train_state->adam_m)
            f.write(reinterpret_cast<const char*>(m.data()),
                    static_cast<std::streamsize>(m.size() * sizeof(float)));
        for (const auto& v : train_state->adam_v)
            f.write(reinterpret_cast<const char*>(v.data()),
                    static_cast<std::streamsize>(v.size() * sizeof(float)));
    }
    if (!f) throw io_error("short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw parse_error("not a checkpoint file: " + path);
    uint32_t ver = 0;
    f.read(reinterpret_cast<char*>(&ver), 4);
    if (ver != kVersion) throw parse_error("unsupported checkpoint version: " + path);
    uint64_t head_len = 0;
    f.read(reinterpret_cast<char*>(&head_len), 8);
    std::string head(head_len, '\0');
    f.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!f) throw parse_error("truncated checkpoint header: " + path);

    json header = json::parse(head);

    Checkpoint ckpt;
    ckpt.model_config = config_from_json(header.at("model"));
    ckpt.schedule_steps = header.at("schedule").at("steps");
    ckpt.features = features_from_json(header.at("features"));
    const json& pj = header.at("provenance");
    ckpt.provenance.created_by = pj.at("created_by");
    ckpt.provenance.seed = pj.at("seed");
    ckpt.provenance.dropout_p = pj.at("dropout_p");
    ckpt.provenance.scheme = pj.at("scheme");
    ckpt.provenance.steps = pj.at("steps");
    ckpt.provenance.discriminative = pj.at("discriminative");

    // The embedded audit table must match a freshly built schedule: mismatch
    // means the loader and the writer disagree about the noise process.
    const NoiseSchedule rebuilt = NoiseSchedule::linear(ckpt.schedule_steps);
    if (header.at("schedule").at("table") != rebuilt.to_table_text())
        throw parse_error("checkpoint schedule table does not match this build: " + path);

    for (const json& tj : header.at("tensors")) {
        std::pair<std::string, std::vector<float>> entry;
        entry.first = tj.at("name");
        size_t total = 1;
        for (const int d : tj.at("shape").get<std::vector<int>>())
            total *= static_cast<size_t>(d);
        entry.second.resize(total);
        f.read(reinterpret_cast<char*>(entry.second.data()),
               static_cast<std::streamsize>(total * sizeof(float)));
        if (!f) throw parse_error("truncated checkpoint tensor data: " + path);
        ckpt.tensors.push_back(std::move(entry));
    }

    if (header.contains("train_state")) {
        TrainState ts;
        ts.adam_steps = header.at("train_state").at("adam_steps");
        const auto rng_hex =
            header.at("train_state").at("rng").get<std::vector<std::string>>();
        check_arg(rng_hex.size() == 6, "checkpoint: bad rng state");
        for (size_t i = 0; i < 6; ++i)
            ts.rng_state[i] = std::stoull(rng_hex[i], nullptr, 16);
        for (const auto& [name, w] : ckpt.tensors) {
            std::vector<float> m(w.size());
            f.read(reinterpret_cast<char*>(m.data()),
                   static_cast<std::streamsize>(m.size() * sizeof(float)));
            ts.adam_m.push_back(std::move(m));
        }
        for (const auto& [name, w] : ckpt.tensors) {
            std::vector<float> v(w.size());
            f.read(reinterpret_cast<char*>(v.data()),
                   static_cast<std::streamsize>(v.size() * sizeof(float)));
            ts.adam_v.push_back(std::move(v));
        }
        if (!f) throw parse_error("truncated checkpoint train state: " + path);
        ckpt.train_state = std::move(ts);
    }
    return ckpt;
}

DiffRollNetF restore_model(const Checkpoint& ckpt) {
    DiffRollNetF model(ckpt.model_config, 0);
    const auto& reg = model.tensors();
    check_arg(reg.size() == ckpt.tensors.size(),
              "checkpoint: tensor count does not match the architecture");
    for (size_t i = 0; i < reg.size(); ++i) {
        check_arg(reg[i]->name == ckpt.tensors[i].first,
                  "checkpoint: tensor name mismatch at " + reg[i]->name);
        check_arg(reg[i]->size() == ckpt.tensors[i].second.size(),
                  "checkpoint: tensor size mismatch at " + reg[i]->name);
        reg[i]->w = ckpt.tensors[i].second;
    }
    return model;
}

uint64_t checkpoint_file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open file for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (f) {
        f.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<size_t>(f.gcount()), h);
    }
    return h;
}

}  // namespace diffroll
