#include "diffroll/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "diffroll/arrayio.hpp"
#include "diffroll/midi.hpp"
#include "diffroll/rng.hpp"
#include "diffroll/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace diffroll {

const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "test") return Split::Test;
    throw std::invalid_argument("unknown split: " + s);
}

DatasetLayout layout_from_string(const std::string& s) {
    if (s == "flat") return DatasetLayout::Flat;
    if (s == "maestro") return DatasetLayout::Maestro;
    if (s == "maps") return DatasetLayout::Maps;
    throw std::invalid_argument("unknown layout: " + s + " (expected flat|maestro|maps)");
}

std::vector<ManifestEntry> DatasetManifest::split_entries(Split s) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
        if (e.split == s) out.push_back(e);
    return out;
}

namespace {

bool is_midi(const fs::path& p) {
    const std::string e = p.extension().string();
    return e == ".mid" || e == ".midi";
}

bool is_audio(const fs::path& p) {
    return p.extension().string() == ".wav";
}

DatasetManifest ingest_flat(const std::string& root) {
    std::map<std::string, fs::path> wavs, midis;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        if (is_audio(entry.path())) wavs[entry.path().stem().string()] = entry.path();
        if (is_midi(entry.path())) midis[entry.path().stem().string()] = entry.path();
    }
    DatasetManifest m;
    for (const auto& [stem, wav] : wavs) {
        const auto it = midis.find(stem);
        if (it == midis.end()) {
            m.excluded.push_back(wav.string());
            continue;
        }
        // No split metadata in a flat tree: everything trains.
        m.entries.push_back({wav.string(), it->second.string(), Split::Train});
    }
    for (const auto& [stem, midi] : midis)
        if (!wavs.count(stem)) m.excluded.push_back(midi.string());
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.midi_path < b.midi_path;
              });
    return m;
}

DatasetManifest ingest_maestro(const std::string& root) {
    // Accept the v2-style record list, the v3 columnar json, or the csv.
    fs::path meta_json, meta_csv;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("maestro", 0) == 0 && entry.path().extension() == ".json")
            meta_json = entry.path();
        if (name.rfind("maestro", 0) == 0 && entry.path().extension() == ".csv")
            meta_csv = entry.path();
    }

    DatasetManifest m;
    auto add_entry = [&](const std::string& split, const std::string& audio,
                         const std::string& midi) {
        ManifestEntry e;
        e.split = split_from_string(split);
        e.audio_path = (fs::path(root) / audio).string();
        e.midi_path = (fs::path(root) / midi).string();
        if (!fs::exists(e.audio_path) || !fs::exists(e.midi_path)) {
            m.excluded.push_back(e.midi_path);
            return;
        }
        m.entries.push_back(std::move(e));
    };

    if (!meta_json.empty()) {
        std::ifstream f(meta_json);
        json j = json::parse(f);
        if (j.is_array()) {
            for (const auto& rec : j)
                add_entry(rec.at("split"), rec.at("audio_filename"),
                          rec.at("midi_filename"));
        } else if (j.is_object() && j.contains("split")) {
            // v3 columnar: {"split": {"0": "train", ...}, "audio_filename": {...}}
            const auto& splits = j.at("split");
            const auto& audio = j.at("audio_filename");
            const auto& midi = j.at("midi_filename");
            for (auto it = splits.begin(); it != splits.end(); ++it)
                add_entry(it.value(), audio.at(it.key()), midi.at(it.key()));
        } else {
            throw parse_error("unrecognized maestro metadata shape: " + meta_json.string());
        }
        return m;
    }
    if (!meta_csv.empty()) {
        std::ifstream f(meta_csv);
        std::string line;
        std::getline(f, line);  // header
        std::vector<std::string> cols;
        {
            size_t start = 0;
            while (start <= line.size()) {
                const size_t comma = line.find(',', start);
                cols.push_back(line.substr(start, comma - start));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
        }
        auto col_of = [&](const std::string& name) {
            const auto it = std::find(cols.begin(), cols.end(), name);
            if (it == cols.end())
                throw parse_error("maestro csv missing column: " + name);
            return static_cast<size_t>(it - cols.begin());
        };
        const size_t split_col = col_of("split");
        const size_t audio_col = col_of("audio_filename");
        const size_t midi_col = col_of("midi_filename");
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            std::vector<std::string> fields;
            size_t start = 0;
            while (start <= line.size()) {
                const size_t comma = line.find(',', start);
                fields.push_back(line.substr(start, comma - start));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            if (fields.size() <= std::max({split_col, audio_col, midi_col})) continue;
            add_entry(fields[split_col], fields[audio_col], fields[midi_col]);
        }
        return m;
    }
    throw io_error(
        "maestro layout: no maestro*.json or maestro*.csv metadata found under " + root);
}

// MAPS filenames look like MAPS_MUS-chpn_op10_e01_ENSTDkCl.wav: the piece id
// sits between "MAPS_MUS-" and the trailing instrument/setting code, which
// also decides the split (the two Disklavier sets are the test split).
const std::set<std::string> kMapsInstruments = {
    "AkPnBcht", "AkPnBsdf", "AkPnCGdD", "AkPnStgb", "ENSTDkAm",
    "ENSTDkCl", "SptkBGAm", "SptkBGCl", "StbgTGd2"};

void maps_split_stem(const std::string& stem, std::string& piece,
                     std::string& instrument) {
    instrument.clear();
    std::string body = stem;
    for (const auto& code : kMapsInstruments) {
        const std::string suffix = "_" + code;
        if (body.size() > suffix.size() &&
            body.compare(body.size() - suffix.size(), suffix.size(), suffix) == 0) {
            instrument = code;
            body = body.substr(0, body.size() - suffix.size());
            break;
        }
    }
    if (instrument.empty()) {
        const size_t last = body.rfind('_');
        if (last != std::string::npos) {
            instrument = body.substr(last + 1);
            body = body.substr(0, last);
        }
    }
    const size_t dash = body.find('-');
    piece = dash == std::string::npos ? body : body.substr(dash + 1);
}

DatasetManifest ingest_maps(const std::string& root, bool remove_overlap) {
    static const std::set<std::string> kTestSets = {"ENSTDkCl", "ENSTDkAm"};
    DatasetManifest m;
    std::map<std::string, fs::path> midis;
    std::vector<fs::path> wavs;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        if (is_audio(entry.path())) wavs.push_back(entry.path());
        if (is_midi(entry.path()))
            midis[(entry.path().parent_path() / entry.path().stem()).string()] =
                entry.path();
    }
    std::sort(wavs.begin(), wavs.end());
    if (wavs.empty())
        throw io_error("maps layout: no MUS wav files found under " + root);

    std::set<std::string> test_pieces;
    std::vector<std::pair<ManifestEntry, std::string>> train_entries;  // + piece id
    for (const auto& wav : wavs) {
        // Only the MUS (full pieces) subset carries transcription targets.
        if (wav.parent_path().filename() != "MUS") continue;
        const auto key = (wav.parent_path() / wav.stem()).string();
        const auto it = midis.find(key);
        if (it == midis.end()) {
            m.excluded.push_back(wav.string());
            continue;
        }
        std::string piece, instrument;
        maps_split_stem(wav.stem().string(), piece, instrument);

        ManifestEntry e{wav.string(), it->second.string(), Split::Train};
        if (kTestSets.count(instrument)) {
            e.split = Split::Test;
            test_pieces.insert(piece);
            m.entries.push_back(std::move(e));
        } else {
            train_entries.emplace_back(std::move(e), piece);
        }
    }
    for (auto& [entry, piece] : train_entries) {
        if (remove_overlap && test_pieces.count(piece)) {
            ++m.overlap_removed;
            m.excluded.push_back(entry.audio_path);
            continue;
        }
        m.entries.push_back(std::move(entry));
    }
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.midi_path < b.midi_path;
              });
    return m;
}

}  // namespace

DatasetManifest ingest(const std::string& root, DatasetLayout layout,
                       bool remove_train_test_overlap) {
    if (!fs::is_directory(root)) throw io_error("dataset root is not a directory: " + root);
    switch (layout) {
        case DatasetLayout::Flat: return ingest_flat(root);
        case DatasetLayout::Maestro: return ingest_maestro(root);
        case DatasetLayout::Maps: return ingest_maps(root, remove_train_test_overlap);
    }
    throw std::invalid_argument("ingest: bad layout");
}

DatasetManifest ingest_rolls_only(const std::string& root) {
    if (!fs::is_directory(root)) throw io_error("dataset root is not a directory: " + root);
    DatasetManifest m;
    m.rolls_only = true;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file() || !is_midi(entry.path())) continue;
        m.entries.push_back({"", entry.path().string(), Split::Train});
    }
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.midi_path < b.midi_path;
              });
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    json j;
    j["kind"] = m.rolls_only ? "rolls_only" : "paired";
    j["overlap_removed"] = m.overlap_removed;
    j["excluded"] = m.excluded;
    j["entries"] = json::array();
    for (const auto& e : m.entries)
        j["entries"].push_back({{"audio", e.audio_path},
                                {"midi", e.midi_path},
                                {"split", to_string(e.split)}});
    std::ofstream f(path);
    if (!f) throw io_error("cannot write manifest: " + path);
    f << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open manifest: " + path);
    json j = json::parse(f);
    DatasetManifest m;
    m.rolls_only = j.at("kind") == "rolls_only";
    m.overlap_removed = j.value("overlap_removed", 0);
    if (j.contains("excluded")) m.excluded = j.at("excluded").get<std::vector<std::string>>();
    for (const auto& ej : j.at("entries")) {
        ManifestEntry e;
        e.audio_path = ej.at("audio");
        e.midi_path = ej.at("midi");
        e.split = split_from_string(ej.at("split"));
        check_arg(m.rolls_only == e.audio_path.empty(),
                  "manifest kind does not match entry: " + e.midi_path);
        m.entries.push_back(std::move(e));
    }
    return m;
}

DatasetManifest make_toy_dataset(int num_items, uint64_t seed, const std::string& out_dir) {
    check_arg(num_items > 0, "make_toy_dataset: num_items must be positive");
    fs::create_directories(out_dir);

    constexpr int kSampleRate = 16000;
    constexpr int kNumSamples = 327680;  // 20.48 s
    constexpr double kDuration = static_cast<double>(kNumSamples) / kSampleRate;

    Rng root(seed);
    DatasetManifest m;
    for (int item = 0; item < num_items; ++item) {
        Rng rng = root.fork(static_cast<uint64_t>(item));

        // Sparse melody with occasional two-note overlap; same-pitch overlaps
        // are rejected so the roll rasterization stays unambiguous.
        const int n_notes = static_cast<int>(rng.uniform_int(12, 20));
        std::vector<NoteEvent> notes;
        for (int k = 0; k < n_notes; ++k) {
            NoteEvent e;
            e.pitch = static_cast<int>(rng.uniform_int(48, 84));
            const double dur = rng.uniform(0.35, 1.0);
            e.onset = rng.uniform(0.1, kDuration - 1.2);
            e.offset = e.onset + dur;
            bool clashes = false;
            for (const NoteEvent& o : notes)
                if (o.pitch == e.pitch && e.onset < o.offset + 0.1 &&
                    o.onset < e.offset + 0.1)
                    clashes = true;
            if (!clashes) notes.push_back(e);
        }
        std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
            return a.onset < b.onset || (a.onset == b.onset && a.pitch < b.pitch);
        });

        std::vector<float> audio(kNumSamples, 0.0f);
        const double two_pi = 6.283185307179586476925286766559;
        for (const NoteEvent& e : notes) {
            const double freq = 440.0 * std::pow(2.0, (e.pitch - 69) / 12.0);
            const auto s0 = static_cast<int>(e.onset * kSampleRate);
            const auto s1 = std::min(kNumSamples, static_cast<int>(e.offset * kSampleRate));
            const int ramp = kSampleRate / 100;  // 10 ms attack/release
            for (int s = s0; s < s1; ++s) {
                double env = 1.0;
                if (s - s0 < ramp) env = static_cast<double>(s - s0) / ramp;
                if (s1 - s < ramp) env = std::min(env, static_cast<double>(s1 - s) / ramp);
                audio[static_cast<size_t>(s)] += static_cast<float>(
                    0.2 * env * std::sin(two_pi * freq * (s - s0) / kSampleRate));
            }
        }

        char name[32];
        std::snprintf(name, sizeof(name), "toy_%03d", item);
        const std::string wav_path = (fs::path(out_dir) / (std::string(name) + ".wav")).string();
        const std::string mid_path = (fs::path(out_dir) / (std::string(name) + ".mid")).string();
        write_wav(wav_path, audio, kSampleRate);
        write_midi(mid_path, notes);
        m.entries.push_back({wav_path, mid_path, Split::Train});
    }
    save_manifest((fs::path(out_dir) / "manifest.json").string(), m);
    return m;
}

std::vector<TrainSample> load_samples(const std::vector<ManifestEntry>& entries,
                                      const MelExtractor& extractor,
                                      const std::string& cache_dir) {
    std::vector<TrainSample> out;
    out.reserve(entries.size());
    const double frame_rate = extractor.config().frame_rate();

    for (const auto& e : entries) {
        TrainSample s;
        if (e.paired()) {
            bool from_cache = false;
            std::string cache_path;
            if (!cache_dir.empty()) {
                std::ifstream af(e.audio_path, std::ios::binary);
                if (!af) throw io_error("cannot open audio: " + e.audio_path);
                std::string bytes((std::istreambuf_iterator<char>(af)),
                                  std::istreambuf_iterator<char>());
                const uint64_t key =
                    fnv1a64(extractor.config().fingerprint(), fnv1a64(bytes));
                fs::create_directories(cache_dir);
                cache_path = (fs::path(cache_dir) / (hex64(key) + ".dra")).string();
                if (fs::exists(cache_path)) {
                    s.mel = load_array(cache_path);
                    from_cache = true;
                }
            }
            if (!from_cache) {
                const AudioSegment seg = extractor.load_and_resample(e.audio_path);
                s.mel = extractor.conditioner(seg).data;
                if (!cache_path.empty()) save_array(cache_path, s.mel);
            }
            s.roll = midi_to_roll(e.midi_path, frame_rate, s.mel.cols).data;
        } else {
            // Rolls-only: frame count from the midi itself.
            const MidiContent midi = read_midi(e.midi_path);
            double last = 0.0;
            for (const auto& n : midi.notes) last = std::max(last, n.offset);
            const int frames = std::max(1, static_cast<int>(std::ceil(last * frame_rate)));
            s.roll = midi_to_roll(e.midi_path, frame_rate, frames).data;
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace diffroll
