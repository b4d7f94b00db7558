// diffroll: diffusion-based piano transcription, generation and inpainting.
//
// Subcommands: make-toy-dataset, train, pretrain, transcribe, generate,
// inpaint, evaluate, inspect-checkpoint.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffroll/arrayio.hpp"
#include "diffroll/checkpoint.hpp"
#include "diffroll/dataset.hpp"
#include "diffroll/evaluation.hpp"
#include "diffroll/gemm.hpp"
#include "diffroll/midi.hpp"
#include "diffroll/sampler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace diffroll;

namespace {

constexpr const char* kToolTag = "diffroll-cli/1.0";

void write_provenance(const std::string& primary_output, const std::string& subcommand,
                      const json& resolved, uint64_t seed,
                      const std::string& checkpoint_path) {
    json j;
    j["tool"] = kToolTag;
    j["subcommand"] = subcommand;
    j["options"] = resolved;
    j["seed"] = seed;
    if (!checkpoint_path.empty())
        j["checkpoint_hash"] = hex64(checkpoint_file_hash(checkpoint_path));
    std::ofstream f(primary_output + ".provenance.json");
    if (!f) throw io_error("cannot write provenance record for " + primary_output);
    f << j.dump(2) << "\n";
}

std::vector<int> parse_dilation(const std::string& s) {
    std::vector<int> out;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t comma = s.find(',', start);
        const std::string tok = s.substr(start, comma - start);
        if (!tok.empty()) out.push_back(std::stoi(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty dilation pattern");
    return out;
}

struct LoadedCheckpoint {
    Checkpoint ckpt;
    DiffRollNetF model;
    NoiseSchedule schedule;
    MelExtractor extractor;
};

LoadedCheckpoint open_checkpoint(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    DiffRollNetF model = restore_model(ckpt);
    NoiseSchedule sched = NoiseSchedule::linear(ckpt.schedule_steps);
    MelExtractor extractor(ckpt.features);
    return {std::move(ckpt), std::move(model), std::move(sched), std::move(extractor)};
}

DenoiserFn model_denoiser(const DiffRollNetF& model) {
    // One workspace per sampler run; the parameters themselves stay read-only.
    auto ws = std::make_shared<Workspace<float>>();
    return [&model, ws](const batch3f& x, const std::vector<int>& t, const batch3f& c,
                        batch3f& out) { out = model.predict_x0(x, t, c, *ws); };
}

// Feature keys may be pinned in a config file; they must then agree with the
// checkpoint. Silent recomputation with different features is never allowed.
void check_feature_overrides(const CLI::App& app, const FeatureConfig& from_ckpt) {
    const std::vector<std::pair<std::string, double>> keys = {
        {"feature-sample-rate", static_cast<double>(from_ckpt.sample_rate)},
        {"feature-hop", static_cast<double>(from_ckpt.hop_length)},
        {"feature-window", static_cast<double>(from_ckpt.window_size)},
        {"feature-mel-bins", static_cast<double>(from_ckpt.mel_bins)},
        {"feature-fmax", from_ckpt.fmax_hz},
    };
    for (const auto& [name, ckpt_value] : keys) {
        const auto* opt = app.get_option_no_throw("--" + name);
        if (opt && opt->count() > 0) {
            const double requested = std::stod(opt->as<std::string>());
            if (requested != ckpt_value)
                throw std::invalid_argument(
                    "--" + name + " = " + opt->as<std::string>() +
                    " conflicts with the checkpoint value; refusing to recompute "
                    "features with a different configuration");
        }
    }
}

// Expands "--config file" into "--key=value" tokens for every key the command
// line does not already carry, so explicit flags always win. Unknown keys fail
// through normal option parsing.
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    for (size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") config_path = args[i + 1];
    if (config_path.empty()) return args;

    std::ifstream f(config_path);
    if (!f) throw io_error("cannot open config file: " + config_path);
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(f, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw parse_error("config line is not key=value: " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const std::string flag = "--" + key;
        bool present = false;
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) present = true;
        if (!present) args.push_back(flag + "=" + value);
    }
    return args;
}

void add_feature_override_flags(CLI::App* cmd) {
    // Present so a config file shared with training can be validated against
    // the checkpoint instead of silently ignored.
    for (const char* name : {"feature-sample-rate", "feature-hop", "feature-window",
                             "feature-mel-bins", "feature-fmax"})
        cmd->add_option(std::string("--") + name, "feature pipeline override (validated)")
            ->group("");
}

std::vector<TrainSample> load_split(const std::string& data_dir, const std::string& layout,
                                    bool maps_dedup, const std::string& split,
                                    const MelExtractor& extractor,
                                    const std::string& cache_dir, bool rolls_only) {
    DatasetManifest manifest =
        rolls_only ? ingest_rolls_only(data_dir)
                   : ingest(data_dir, layout_from_string(layout), maps_dedup);
    if (manifest.overlap_removed > 0)
        std::fprintf(stderr, "[ingest] removed %d overlapping train entries\n",
                     manifest.overlap_removed);
    for (const auto& ex : manifest.excluded)
        std::fprintf(stderr, "[ingest] excluded: %s\n", ex.c_str());
    const auto entries = manifest.split_entries(split_from_string(split));
    check_arg(!entries.empty(), "no dataset entries in split '" + split + "'");
    return load_samples(entries, extractor, cache_dir);
}

// ---------------------------------------------------------------------------

int cmd_make_toy_dataset(int items, uint64_t seed, const std::string& out_dir) {
    const DatasetManifest m = make_toy_dataset(items, seed, out_dir);
    json resolved{{"items", items}, {"out", out_dir}};
    write_provenance((fs::path(out_dir) / "manifest.json").string(), "make-toy-dataset",
                     resolved, seed, "");
    std::printf("wrote %zu toy pairs under %s\n", m.entries.size(), out_dir.c_str());
    return 0;
}

struct TrainArgs {
    std::string data, unpaired_data, layout = "flat", split = "train";
    bool maps_dedup = false;
    std::string scheme = "supervised";
    bool discriminative = false;
    int steps = 1000, batch = 16, crop = 0, T = 200;
    double lr = 5e-4, lr_final = -1.0, p = 0.1, mix_ratio = 0.5;
    int channels = 512, layers = 15, kernel = 9;
    std::string dilation = "1";
    uint64_t seed = 0;
    std::string out = "model.drck", log_path, resume, cache_dir;
    int checkpoint_every = 0;
};

int cmd_train(const TrainArgs& a, const std::string& invocation) {
    TrainConfig tcfg;
    tcfg.scheme = train_scheme_from_string(a.scheme);
    tcfg.dropout_p = a.p;
    tcfg.batch_size = a.batch;
    tcfg.lr = a.lr;
    tcfg.lr_final = a.lr_final;
    tcfg.steps = a.steps;
    tcfg.seed = a.seed;
    tcfg.crop_frames = a.crop;
    tcfg.mix_ratio = a.mix_ratio;
    tcfg.discriminative = a.discriminative;

    FeatureConfig fcfg;
    MelExtractor extractor(fcfg);
    NoiseSchedule schedule = NoiseSchedule::linear(a.T);

    std::optional<DiffRollNetF> model;
    std::optional<TrainState> resume_state;
    if (!a.resume.empty()) {
        LoadedCheckpoint lc = open_checkpoint(a.resume);
        check_arg(lc.ckpt.schedule_steps == a.T,
                  "--T conflicts with the resumed checkpoint's schedule");
        check_arg(lc.ckpt.features == fcfg,
                  "resumed checkpoint was trained with a different feature config");
        model.emplace(std::move(lc.model));
        if (lc.ckpt.train_state) resume_state = *lc.ckpt.train_state;
        std::printf("resumed from %s at %lld steps\n", a.resume.c_str(),
                    static_cast<long long>(resume_state ? resume_state->adam_steps : 0));
    } else {
        DenoiserConfig mcfg;
        mcfg.residual_channels = a.channels;
        mcfg.num_layers = a.layers;
        mcfg.kernel_size = a.kernel;
        mcfg.dilation_pattern = parse_dilation(a.dilation);
        mcfg.max_timestep = a.T;
        model.emplace(mcfg, a.seed);
    }
    std::printf("model: %lld parameters, receptive field %d frames\n",
                static_cast<long long>(model->param_count()),
                model->config().receptive_field_frames());

    const bool unpaired_primary = tcfg.scheme == TrainScheme::UnpairedPretrain;
    std::vector<TrainSample> paired, unpaired;
    if (unpaired_primary) {
        unpaired = load_split(a.data, a.layout, a.maps_dedup, a.split, extractor,
                              a.cache_dir, /*rolls_only=*/true);
    } else {
        paired = load_split(a.data, a.layout, a.maps_dedup, a.split, extractor,
                            a.cache_dir, /*rolls_only=*/false);
        if (!a.unpaired_data.empty())
            unpaired = load_split(a.unpaired_data, a.layout, false, "train", extractor,
                                  a.cache_dir, /*rolls_only=*/true);
    }
    std::printf("dataset: %zu paired, %zu unpaired samples\n", paired.size(),
                unpaired.size());

    Trainer trainer(*model, schedule, tcfg);
    if (resume_state) {
        trainer.optimizer().moments1() = resume_state->adam_m;
        trainer.optimizer().moments2() = resume_state->adam_v;
        trainer.optimizer().set_step_count(resume_state->adam_steps);
        trainer.rng().restore(resume_state->rng_state);
    }

    const std::string log_path = a.log_path.empty() ? a.out + ".log.jsonl" : a.log_path;
    std::ofstream log(log_path, resume_state ? std::ios::app : std::ios::trunc);
    if (!log) throw io_error("cannot write training log: " + log_path);

    Provenance prov;
    prov.created_by = invocation;
    prov.seed = a.seed;
    prov.dropout_p = a.p;
    prov.scheme = a.scheme;
    prov.discriminative = a.discriminative;

    auto save = [&](int64_t steps_done) {
        TrainState ts;
        ts.adam_m = trainer.optimizer().moments1();
        ts.adam_v = trainer.optimizer().moments2();
        ts.adam_steps = trainer.optimizer().step_count();
        ts.rng_state = trainer.rng().state();
        prov.steps = steps_done;
        save_checkpoint(a.out, *model, schedule, fcfg, prov, &ts);
    };

    const auto t0 = std::chrono::steady_clock::now();
    trainer.run(paired, unpaired, [&](const LossRecord& rec) {
        log << json{{"step", rec.step},
                    {"loss", rec.loss},
                    {"p", rec.p},
                    {"scheme", to_string(rec.scheme)},
                    {"source", rec.paired_source ? "paired" : "unpaired"}}
                   .dump()
            << "\n";
        if (rec.step % 50 == 0 || rec.step == 1) {
            std::printf("step %6lld  loss %.6f\n", static_cast<long long>(rec.step),
                        rec.loss);
            std::fflush(stdout);
        }
        if (a.checkpoint_every > 0 && rec.step % a.checkpoint_every == 0)
            save(rec.step);
    });
    save(trainer.steps_done());
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("trained %lld steps in %.1f s -> %s\n",
                static_cast<long long>(trainer.steps_done()), secs, a.out.c_str());

    json resolved{{"data", a.data},         {"scheme", a.scheme},
                  {"steps", a.steps},       {"batch", a.batch},
                  {"lr", a.lr},             {"p", a.p},
                  {"T", a.T},               {"channels", a.channels},
                  {"layers", a.layers},     {"kernel", a.kernel},
                  {"dilation", a.dilation}, {"crop", a.crop},
                  {"discriminative", a.discriminative}};
    write_provenance(a.out, "train", resolved, a.seed, a.out);
    return 0;
}

struct SampleArgs {
    std::string checkpoint;
    double w = 0.5;
    std::string sigma = "ddpm";
    double threshold = 0.5;
    uint64_t seed = 0;
    bool save_posteriorgram = false;
    int snapshot_every = 0;
};

SamplerConfig sampler_config(const SampleArgs& a, bool discriminative) {
    SamplerConfig cfg;
    cfg.w = a.w;
    cfg.sigma_mode = sigma_mode_from_string(a.sigma);
    cfg.threshold = a.threshold;
    cfg.seed = a.seed;
    cfg.snapshot_every = a.snapshot_every;
    cfg.discriminative = discriminative;
    return cfg;
}

void write_outputs(const SampleResult& res, const std::string& base,
                   bool save_posteriorgram) {
    roll_to_midi(res.roll, base + ".mid");
    if (save_posteriorgram) save_array(base + ".posterior.dra", res.raw);
    for (const auto& [t, snap] : res.trajectory)
        save_array(base + ".x" + std::to_string(t) + ".dra", snap);
}

int cmd_transcribe(const SampleArgs& a, const std::string& audio, const std::string& data,
                   const std::string& layout, const std::string& split,
                   const std::string& out_dir, const std::string& cache_dir) {
    LoadedCheckpoint lc = open_checkpoint(a.checkpoint);
    lc.schedule.set_mode(sigma_mode_from_string(a.sigma));
    const bool disc = lc.ckpt.provenance.discriminative;
    if (disc) std::printf("discriminative checkpoint: single-pass transcription\n");

    std::vector<std::pair<std::string, std::string>> inputs;  // (stem, wav path)
    if (!audio.empty()) {
        inputs.emplace_back(fs::path(audio).stem().string(), audio);
    } else {
        check_arg(!data.empty(), "transcribe: pass --audio or --data");
        DatasetManifest manifest = ingest(data, layout_from_string(layout), false);
        for (const auto& e : manifest.split_entries(split_from_string(split)))
            inputs.emplace_back(fs::path(e.audio_path).stem().string(), e.audio_path);
        check_arg(!inputs.empty(), "transcribe: split is empty");
    }

    fs::create_directories(out_dir);
    Sampler sampler(model_denoiser(lc.model), lc.schedule,
                    lc.extractor.config().frame_rate());
    const SamplerConfig cfg = sampler_config(a, disc);

    for (const auto& [stem, wav_path] : inputs) {
        const AudioSegment seg = lc.extractor.load_and_resample(wav_path);
        const MelConditioner cond = lc.extractor.conditioner(seg);
        const auto results = sampler.sample({cond}, cfg);
        const std::string base = (fs::path(out_dir) / stem).string();
        write_outputs(results[0], base, a.save_posteriorgram);
        std::printf("transcribed %s -> %s.mid (%d frames)\n", wav_path.c_str(),
                    base.c_str(), cond.frames());
        (void)cache_dir;
    }

    json resolved{{"checkpoint", a.checkpoint}, {"w", a.w},
                  {"sigma", a.sigma},           {"threshold", a.threshold},
                  {"audio", audio},             {"data", data},
                  {"out_dir", out_dir}};
    write_provenance((fs::path(out_dir) / "transcribe").string(), "transcribe", resolved,
                     a.seed, a.checkpoint);
    return 0;
}

int cmd_generate(const SampleArgs& a, int frames, const std::string& out) {
    LoadedCheckpoint lc = open_checkpoint(a.checkpoint);
    lc.schedule.set_mode(sigma_mode_from_string(a.sigma));
    check_arg(!lc.ckpt.provenance.discriminative,
              "generate: discriminative checkpoints cannot generate");

    Sampler sampler(model_denoiser(lc.model), lc.schedule,
                    lc.extractor.config().frame_rate());
    const SamplerConfig cfg = sampler_config(a, false);
    const MelConditioner blank =
        blank_conditioner(lc.model.config().mel_bins, frames);
    const auto results = sampler.sample({blank}, cfg);

    roll_to_midi(results[0].roll, out);
    if (a.save_posteriorgram)
        save_array(out + ".posterior.dra", results[0].raw);
    for (const auto& [t, snap] : results[0].trajectory)
        save_array(out + ".x" + std::to_string(t) + ".dra", snap);
    const auto notes = roll_to_notes(results[0].roll);
    std::printf("generated %d frames, %zu notes -> %s\n", frames, notes.size(),
                out.c_str());

    json resolved{{"checkpoint", a.checkpoint}, {"frames", frames}, {"w", a.w},
                  {"sigma", a.sigma},           {"out", out}};
    write_provenance(out, "generate", resolved, a.seed, a.checkpoint);
    return 0;
}

int cmd_inpaint(const SampleArgs& a, const std::string& audio, double mask_start,
                double mask_end, const std::string& out) {
    LoadedCheckpoint lc = open_checkpoint(a.checkpoint);
    lc.schedule.set_mode(sigma_mode_from_string(a.sigma));
    check_arg(mask_end >= mask_start, "inpaint: --mask-end must be >= --mask-start");

    const AudioSegment seg = lc.extractor.load_and_resample(audio);
    const MelConditioner cond = lc.extractor.conditioner(seg);
    const double fr = lc.extractor.config().frame_rate();
    std::vector<uint8_t> mask(static_cast<size_t>(cond.frames()), 0);
    for (int j = 0; j < cond.frames(); ++j) {
        const double t = j / fr;
        if (t >= mask_start && t < mask_end) mask[static_cast<size_t>(j)] = 1;
    }

    Sampler sampler(model_denoiser(lc.model), lc.schedule, fr);
    const auto results =
        sampler.inpaint({cond}, mask, sampler_config(a, lc.ckpt.provenance.discriminative));
    roll_to_midi(results[0].roll, out);
    if (a.save_posteriorgram) save_array(out + ".posterior.dra", results[0].raw);
    std::printf("inpainted %s (mask %.2f..%.2f s) -> %s\n", audio.c_str(), mask_start,
                mask_end, out.c_str());

    json resolved{{"checkpoint", a.checkpoint}, {"audio", audio},
                  {"mask_start", mask_start},   {"mask_end", mask_end},
                  {"w", a.w},                   {"out", out}};
    write_provenance(out, "inpaint", resolved, a.seed, a.checkpoint);
    return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& ref_dir, double tol,
                 const std::string& report_path) {
    const CorpusEval eval = evaluate_corpus(pred_dir, ref_dir, tol);

    std::ofstream report;
    if (!report_path.empty()) {
        report.open(report_path);
        if (!report) throw io_error("cannot write report: " + report_path);
    }
    std::printf("%-24s %8s %8s %8s %6s %6s\n", "file", "P", "R", "F1", "pred", "ref");
    for (const auto& fe : eval.files) {
        std::printf("%-24s %8.4f %8.4f %8.4f %6d %6d\n", fe.name.c_str(),
                    fe.result.precision, fe.result.recall, fe.result.f1, fe.pred_notes,
                    fe.ref_notes);
        if (report)
            report << json{{"file", fe.name},
                           {"precision", fe.result.precision},
                           {"recall", fe.result.recall},
                           {"f1", fe.result.f1},
                           {"pred_notes", fe.pred_notes},
                           {"ref_notes", fe.ref_notes}}
                          .dump()
                   << "\n";
    }
    if (eval.no_files) std::printf("no files evaluated\n");
    std::printf("macro: P %.4f  R %.4f  F1 %.4f over %zu files\n", eval.macro_precision,
                eval.macro_recall, eval.macro_f1, eval.files.size());
    for (const auto& s : eval.missing_pred)
        std::fprintf(stderr, "missing prediction for: %s\n", s.c_str());
    for (const auto& s : eval.missing_ref)
        std::fprintf(stderr, "missing reference for: %s\n", s.c_str());
    if (report)
        report << json{{"macro_f1", eval.macro_f1},
                       {"macro_precision", eval.macro_precision},
                       {"macro_recall", eval.macro_recall},
                       {"files", eval.files.size()},
                       {"complete", eval.complete()},
                       {"no_files", eval.no_files}}
                      .dump()
               << "\n";
    return eval.complete() ? 0 : 1;
}

int cmd_inspect(const std::string& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    json j;
    j["model"] = {{"residual_channels", ckpt.model_config.residual_channels},
                  {"num_layers", ckpt.model_config.num_layers},
                  {"kernel_size", ckpt.model_config.kernel_size},
                  {"dilation_pattern", ckpt.model_config.dilation_pattern},
                  {"mel_bins", ckpt.model_config.mel_bins},
                  {"max_timestep", ckpt.model_config.max_timestep}};
    j["schedule_steps"] = ckpt.schedule_steps;
    j["features"] = {{"sample_rate", ckpt.features.sample_rate},
                     {"hop_length", ckpt.features.hop_length},
                     {"window_size", ckpt.features.window_size},
                     {"mel_bins", ckpt.features.mel_bins}};
    j["provenance"] = {{"created_by", ckpt.provenance.created_by},
                       {"seed", ckpt.provenance.seed},
                       {"dropout_p", ckpt.provenance.dropout_p},
                       {"scheme", ckpt.provenance.scheme},
                       {"steps", ckpt.provenance.steps},
                       {"discriminative", ckpt.provenance.discriminative}};
    int64_t params = 0;
    for (const auto& [name, w] : ckpt.tensors) params += static_cast<int64_t>(w.size());
    j["parameters"] = params;
    j["has_train_state"] = ckpt.train_state.has_value();
    j["file_hash"] = hex64(checkpoint_file_hash(path));
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion piano-roll transcription"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware default)");

    // every subcommand accepts a key=value config file; explicit flags win
    std::string config_path;
    auto with_config = [&config_path](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file (CLI flags win)");
        cmd->fallthrough();
        return cmd;
    };

    // make-toy-dataset
    auto* toy = with_config(app.add_subcommand("make-toy-dataset", "write a synthetic paired dataset"));
    int toy_items = 4;
    uint64_t toy_seed = 0;
    std::string toy_out = "toy_data";
    toy->add_option("--items", toy_items, "number of wav+midi pairs");
    toy->add_option("--seed", toy_seed, "generator seed");
    toy->add_option("--out", toy_out, "output directory")->required();

    // train / pretrain
    TrainArgs ta;
    auto add_train_flags = [&](CLI::App* cmd, bool pretrain) {
        cmd->add_option("--data", ta.data, "dataset root")->required();
        cmd->add_option("--layout", ta.layout, "flat|maestro|maps");
        cmd->add_flag("--maps-dedup", ta.maps_dedup,
                      "drop train pieces that also appear in the maps test split");
        cmd->add_option("--split", ta.split, "train|validation|test");
        if (!pretrain) {
            cmd->add_option("--scheme", ta.scheme, "supervised|pretrain|p0-plus-1");
            cmd->add_option("--unpaired-data", ta.unpaired_data,
                            "midi-only tree for the p0-plus-1 scheme");
            cmd->add_flag("--discriminative", ta.discriminative,
                          "baseline: x_t = 0 and t = 1 through the same loop");
        }
        cmd->add_option("--steps", ta.steps, "optimizer steps");
        cmd->add_option("--batch", ta.batch, "batch size");
        cmd->add_option("--crop-frames", ta.crop, "random temporal crop (0 = full)");
        cmd->add_option("--lr", ta.lr, "learning rate");
        cmd->add_option("--lr-final", ta.lr_final,
                        "cosine-decay target (negative = constant lr)");
        cmd->add_option("--p", ta.p, "conditioner dropout probability");
        cmd->add_option("--mix-ratio", ta.mix_ratio, "paired-batch probability (p0-plus-1)");
        cmd->add_option("--T", ta.T, "diffusion steps");
        cmd->add_option("--channels", ta.channels, "residual channels");
        cmd->add_option("--layers", ta.layers, "residual layers");
        cmd->add_option("--kernel", ta.kernel, "conv kernel size (odd)");
        cmd->add_option("--dilation", ta.dilation, "cyclic dilation pattern, e.g. 1,2,4");
        cmd->add_option("--seed", ta.seed, "training seed");
        cmd->add_option("--out", ta.out, "checkpoint path")->required();
        cmd->add_option("--log", ta.log_path, "loss log (jsonl)");
        cmd->add_option("--resume", ta.resume, "resume from checkpoint");
        cmd->add_option("--cache-dir", ta.cache_dir, "conditioner cache directory");
        cmd->add_option("--checkpoint-every", ta.checkpoint_every,
                        "save every N steps (0 = only at the end)");
    };
    auto* train = with_config(app.add_subcommand("train", "train on paired audio+midi"));
    add_train_flags(train, false);
    auto* pretrain = with_config(app.add_subcommand("pretrain", "unsupervised pretraining on rolls only"));
    add_train_flags(pretrain, true);

    // transcribe
    SampleArgs sa;
    std::string tr_audio, tr_data, tr_layout = "flat", tr_split = "test",
                tr_out_dir = "transcriptions", tr_cache;
    auto add_sample_flags = [&](CLI::App* cmd) {
        cmd->add_option("--checkpoint", sa.checkpoint, "model checkpoint")->required();
        cmd->add_option("--w", sa.w, "classifier-free guidance weight");
        cmd->add_option("--sigma", sa.sigma, "ddpm|ddim");
        cmd->add_option("--threshold", sa.threshold, "binarization threshold");
        cmd->add_option("--seed", sa.seed, "sampling seed");
        cmd->add_flag("--save-posteriorgram", sa.save_posteriorgram,
                      "write raw x0 arrays next to the midi");
        cmd->add_option("--snapshot-every", sa.snapshot_every,
                        "record x_t every N steps (0 = off)");
        add_feature_override_flags(cmd);
    };
    auto* tr = with_config(app.add_subcommand("transcribe", "audio -> midi"));
    add_sample_flags(tr);
    tr->add_option("--audio", tr_audio, "single audio file");
    tr->add_option("--data", tr_data, "dataset root (transcribe a whole split)");
    tr->add_option("--layout", tr_layout, "flat|maestro|maps");
    tr->add_option("--split", tr_split, "dataset split to transcribe");
    tr->add_option("--out-dir", tr_out_dir, "output directory");
    tr->add_option("--cache-dir", tr_cache, "conditioner cache directory");

    // generate
    auto* gen = with_config(app.add_subcommand("generate", "unconditional piano-roll generation"));
    int gen_frames = 640;
    std::string gen_out = "generated.mid";
    add_sample_flags(gen);
    gen->add_option("--frames", gen_frames, "frames to generate");
    gen->add_option("--out", gen_out, "output midi path");

    // inpaint
    auto* inp = with_config(app.add_subcommand("inpaint", "mask part of the conditioner and resample"));
    std::string inp_audio, inp_out = "inpainted.mid";
    double mask_start = 0.0, mask_end = 0.0;
    add_sample_flags(inp);
    inp->add_option("--audio", inp_audio, "audio file")->required();
    inp->add_option("--mask-start", mask_start, "mask start (seconds)");
    inp->add_option("--mask-end", mask_end, "mask end (seconds)");
    inp->add_option("--out", inp_out, "output midi path");

    // evaluate
    auto* ev = with_config(app.add_subcommand("evaluate", "note-wise transcription F1"));
    std::string ev_pred, ev_ref, ev_report;
    double ev_tol = 0.05;
    ev->add_option("--pred-dir", ev_pred, "predicted midi directory")->required();
    ev->add_option("--ref-dir", ev_ref, "reference midi directory")->required();
    ev->add_option("--tol", ev_tol, "onset tolerance in seconds");
    ev->add_option("--report", ev_report, "jsonl report path");

    // inspect-checkpoint
    auto* ins = with_config(app.add_subcommand("inspect-checkpoint", "print checkpoint metadata"));
    std::string ins_path;
    ins->add_option("--checkpoint", ins_path, "checkpoint path")->required();

    std::string invocation;
    for (int i = 0; i < argc; ++i) {
        if (i) invocation += ' ';
        invocation += argv[i];
    }

    try {
        std::vector<std::string> args = expand_config_args(argc, argv);
        std::reverse(args.begin(), args.end());  // CLI11 vector parse order
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    set_num_threads(threads);

    try {
        if (*toy) return cmd_make_toy_dataset(toy_items, toy_seed, toy_out);
        if (*pretrain) {
            ta.scheme = "pretrain";
            return cmd_train(ta, invocation);
        }
        if (*train) return cmd_train(ta, invocation);
        if (*tr) {
            const Checkpoint ckpt = load_checkpoint(sa.checkpoint);
            check_feature_overrides(*tr, ckpt.features);
            if (sa.w != 0.0 && ckpt.provenance.discriminative)
                std::fprintf(stderr, "note: --w is ignored for discriminative checkpoints\n");
            return cmd_transcribe(sa, tr_audio, tr_data, tr_layout, tr_split, tr_out_dir,
                                  tr_cache);
        }
        if (*gen) {
            const Checkpoint ckpt = load_checkpoint(sa.checkpoint);
            check_feature_overrides(*gen, ckpt.features);
            // Generation cancels the conditional term.
            if (gen->get_option("--w")->count() == 0) sa.w = -1.0;
            return cmd_generate(sa, gen_frames, gen_out);
        }
        if (*inp) {
            const Checkpoint ckpt = load_checkpoint(sa.checkpoint);
            check_feature_overrides(*inp, ckpt.features);
            return cmd_inpaint(sa, inp_audio, mask_start, mask_end, inp_out);
        }
        if (*ev) return cmd_evaluate(ev_pred, ev_ref, ev_tol, ev_report);
        if (*ins) return cmd_inspect(ins_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
