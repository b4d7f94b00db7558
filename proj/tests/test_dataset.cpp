#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "diffroll/dataset.hpp"
#include "diffroll/fft.hpp"
#include "diffroll/midi.hpp"
#include "diffroll/wav.hpp"

using namespace diffroll;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<uint8_t> file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

double spectral_peak(const std::vector<float>& x, size_t start, size_t len, int rate) {
    std::vector<double> frame(len);
    for (size_t i = 0; i < len && start + i < x.size(); ++i) {
        const double hann = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / len);
        frame[i] = x[start + i] * hann;
    }
    size_t n = 1;
    while (n < len) n <<= 1;
    const auto mag = real_magnitude_spectrum(frame, n);
    size_t peak = 1;
    for (size_t k = 1; k + 1 < mag.size(); ++k)
        if (mag[k] > mag[peak]) peak = k;
    const double a = mag[peak - 1], b = mag[peak], c = mag[peak + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    return (static_cast<double>(peak) + shift) * rate / static_cast<double>(n);
}

}  // namespace

TEST_CASE("toy dataset generation is byte-deterministic") {
    const fs::path d1 = fresh_dir("diffroll_toy_a");
    const fs::path d2 = fresh_dir("diffroll_toy_b");
    make_toy_dataset(2, 99, d1.string());
    make_toy_dataset(2, 99, d2.string());
    for (const char* name : {"toy_000.wav", "toy_000.mid", "toy_001.wav", "toy_001.mid"})
        CHECK(file_bytes(d1 / name) == file_bytes(d2 / name));

    // a different seed changes the data
    const fs::path d3 = fresh_dir("diffroll_toy_c");
    make_toy_dataset(2, 100, d3.string());
    CHECK(file_bytes(d1 / "toy_000.wav") != file_bytes(d3 / "toy_000.wav"));
    fs::remove_all(d1);
    fs::remove_all(d2);
    fs::remove_all(d3);
}

TEST_CASE("toy audio spectral peaks sit on the note fundamentals") {
    const fs::path dir = fresh_dir("diffroll_toy_spec");
    make_toy_dataset(1, 5, dir.string());
    const WavData wav = read_wav((dir / "toy_000.wav").string());
    const MidiContent midi = read_midi((dir / "toy_000.mid").string());
    REQUIRE(!midi.notes.empty());

    int checked = 0;
    for (const MidiNote& n : midi.notes) {
        if (n.offset - n.onset < 0.45) continue;
        // monophonic stretch? accept anyway: the strongest partial in the note
        // window must be one of the concurrently sounding fundamentals
        const auto start = static_cast<size_t>((n.onset + 0.05) * wav.sample_rate);
        const double peak = spectral_peak(wav.samples, start, 4096, wav.sample_rate);
        bool near_any = false;
        for (const MidiNote& m : midi.notes) {
            if (m.onset > n.onset + 0.3 || m.offset < n.onset) continue;
            const double f = 440.0 * std::pow(2.0, (m.pitch - 69) / 12.0);
            if (std::fabs(peak - f) < 2.0) near_any = true;
        }
        CHECK(near_any);
        if (++checked == 5) break;
    }
    CHECK(checked > 0);
    fs::remove_all(dir);
}

TEST_CASE("flat ingest pairs by stem, defaults to train, reports strays") {
    const fs::path dir = fresh_dir("diffroll_flat");
    make_toy_dataset(3, 5, dir.string());
    fs::remove(dir / "toy_002.mid");  // make one wav dangle
    write_midi((dir / "orphan.mid").string(), {{60, 0.0, 0.5}});

    const DatasetManifest m = ingest(dir.string(), DatasetLayout::Flat);
    CHECK(m.entries.size() == 2);
    for (const auto& e : m.entries) {
        CHECK(e.split == Split::Train);
        CHECK(e.paired());
    }
    // conservation: entries + exclusions cover everything seen
    CHECK(m.excluded.size() == 2);  // dangling wav + orphan midi
    fs::remove_all(dir);
}

TEST_CASE("manifest save/load round trip") {
    const fs::path dir = fresh_dir("diffroll_manifest");
    const DatasetManifest m = make_toy_dataset(2, 1, dir.string());
    const DatasetManifest loaded = load_manifest((dir / "manifest.json").string());
    REQUIRE(loaded.entries.size() == m.entries.size());
    for (size_t i = 0; i < m.entries.size(); ++i) {
        CHECK(loaded.entries[i].audio_path == m.entries[i].audio_path);
        CHECK(loaded.entries[i].midi_path == m.entries[i].midi_path);
        CHECK(loaded.entries[i].split == m.entries[i].split);
    }
    CHECK(loaded.rolls_only == false);
    fs::remove_all(dir);
}

TEST_CASE("maestro ingest reads the record-list metadata") {
    const fs::path dir = fresh_dir("diffroll_maestro");
    make_toy_dataset(3, 2, dir.string());
    std::ofstream meta(dir / "maestro-v2.0.0.json");
    meta << R"([
      {"split": "train", "audio_filename": "toy_000.wav", "midi_filename": "toy_000.mid"},
      {"split": "validation", "audio_filename": "toy_001.wav", "midi_filename": "toy_001.mid"},
      {"split": "test", "audio_filename": "toy_002.wav", "midi_filename": "toy_002.mid"},
      {"split": "train", "audio_filename": "missing.wav", "midi_filename": "missing.mid"}
    ])";
    meta.close();

    const DatasetManifest m = ingest(dir.string(), DatasetLayout::Maestro);
    CHECK(m.entries.size() == 3);
    CHECK(m.split_entries(Split::Train).size() == 1);
    CHECK(m.split_entries(Split::Validation).size() == 1);
    CHECK(m.split_entries(Split::Test).size() == 1);
    CHECK(m.excluded.size() == 1);
    fs::remove_all(dir);
}

TEST_CASE("maestro ingest reads the v3 columnar metadata") {
    const fs::path dir = fresh_dir("diffroll_maestro3");
    make_toy_dataset(2, 3, dir.string());
    std::ofstream meta(dir / "maestro-v3.0.0.json");
    meta << R"({
      "split": {"0": "train", "1": "test"},
      "audio_filename": {"0": "toy_000.wav", "1": "toy_001.wav"},
      "midi_filename": {"0": "toy_000.mid", "1": "toy_001.mid"}
    })";
    meta.close();
    const DatasetManifest m = ingest(dir.string(), DatasetLayout::Maestro);
    CHECK(m.entries.size() == 2);
    CHECK(m.split_entries(Split::Test).size() == 1);
    fs::remove_all(dir);
}

TEST_CASE("maestro layout without metadata is a descriptive error") {
    const fs::path dir = fresh_dir("diffroll_maestro_none");
    CHECK_THROWS_WITH_AS(ingest(dir.string(), DatasetLayout::Maestro),
                         doctest::Contains("maestro"), io_error);
    fs::remove_all(dir);
}

TEST_CASE("maps ingest: splits by instrument set, overlap filter counts") {
    const fs::path dir = fresh_dir("diffroll_maps");
    // miniature MAPS tree: two synthesized sets + one Disklavier test set
    const fs::path toy = fresh_dir("diffroll_maps_src");
    make_toy_dataset(1, 4, toy.string());
    auto put = [&](const std::string& inst, const std::string& piece) {
        const fs::path mus = dir / inst / "MUS";
        fs::create_directories(mus);
        const std::string stem = "MAPS_MUS-" + piece + "_" + inst;
        fs::copy_file(toy / "toy_000.wav", mus / (stem + ".wav"));
        fs::copy_file(toy / "toy_000.mid", mus / (stem + ".mid"));
    };
    put("AkPnBcht", "chpn_op10_e01");
    put("AkPnBcht", "mz_311_1");
    put("StbgTGd2", "alb_se2");
    put("ENSTDkCl", "chpn_op10_e01");  // test split, overlaps first train piece

    const DatasetManifest plain = ingest(dir.string(), DatasetLayout::Maps, false);
    CHECK(plain.split_entries(Split::Train).size() == 3);
    CHECK(plain.split_entries(Split::Test).size() == 1);
    CHECK(plain.overlap_removed == 0);

    const DatasetManifest dedup = ingest(dir.string(), DatasetLayout::Maps, true);
    CHECK(dedup.split_entries(Split::Train).size() == 2);
    CHECK(dedup.split_entries(Split::Test).size() == 1);
    CHECK(dedup.overlap_removed == 1);
    fs::remove_all(dir);
    fs::remove_all(toy);
}

TEST_CASE("rolls-only ingest lists midi files without audio") {
    const fs::path dir = fresh_dir("diffroll_rolls");
    write_midi((dir / "x.mid").string(), {{60, 0.0, 0.5}});
    write_midi((dir / "y.mid").string(), {{64, 0.0, 0.5}});
    const DatasetManifest m = ingest_rolls_only(dir.string());
    CHECK(m.rolls_only);
    CHECK(m.entries.size() == 2);
    for (const auto& e : m.entries) CHECK(!e.paired());
    fs::remove_all(dir);
}

TEST_CASE("unknown layout string is rejected with expectations listed") {
    CHECK_THROWS_WITH_AS(layout_from_string("zip"), doctest::Contains("flat|maestro|maps"),
                         std::invalid_argument);
    CHECK_THROWS_AS(ingest("/nonexistent", DatasetLayout::Flat), io_error);
}

TEST_CASE("load_samples aligns conditioner and roll frames") {
    const fs::path dir = fresh_dir("diffroll_load");
    const DatasetManifest m = make_toy_dataset(1, 6, dir.string());
    MelExtractor ex;
    const auto samples = load_samples(m.entries, ex);
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].paired());
    CHECK(samples[0].mel.rows == 229);
    CHECK(samples[0].mel.cols == 640);
    CHECK(samples[0].roll.rows == 88);
    CHECK(samples[0].roll.cols == 640);
    // the ground truth contains real notes
    float sum = 0.0f;
    for (const float v : samples[0].roll.v) sum += v;
    CHECK(sum > 0.0f);
    fs::remove_all(dir);
}

TEST_CASE("conditioner cache returns identical features and is reused") {
    const fs::path dir = fresh_dir("diffroll_cache_data");
    const fs::path cache = fresh_dir("diffroll_cache");
    const DatasetManifest m = make_toy_dataset(1, 8, dir.string());
    MelExtractor ex;
    const auto cold = load_samples(m.entries, ex, cache.string());
    size_t files_after_cold = 0;
    for (const auto& e : fs::directory_iterator(cache)) {
        (void)e;
        ++files_after_cold;
    }
    CHECK(files_after_cold == 1);
    const auto warm = load_samples(m.entries, ex, cache.string());
    CHECK(cold[0].mel.v == warm[0].mel.v);
    CHECK(cold[0].roll.v == warm[0].roll.v);
    fs::remove_all(dir);
    fs::remove_all(cache);
}
