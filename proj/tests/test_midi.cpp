#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "diffroll/midi.hpp"
#include "diffroll/rng.hpp"

using namespace diffroll;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    static int counter = 0;
    return (fs::temp_directory_path() /
            ("diffroll_midi_" + std::to_string(++counter) + "_" + name))
        .string();
}

// Minimal independent decoder used as the round-trip oracle: it only follows
// note on/off at the fixed export tempo and never shares code with read_midi.
struct OracleNote {
    int pitch;
    long on_tick;
    long off_tick;
};

std::vector<OracleNote> oracle_decode(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::vector<unsigned char> b((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
    REQUIRE(b.size() > 22);
    size_t pos = 14;          // skip MThd
    REQUIRE(b[pos] == 'M');   // MTrk
    pos += 8;
    long tick = 0;
    std::vector<OracleNote> open, done;
    while (pos < b.size()) {
        long delta = 0;
        while (b[pos] & 0x80) delta = (delta << 7) | (b[pos++] & 0x7f);
        delta = (delta << 7) | b[pos++];
        tick += delta;
        const unsigned char status = b[pos++];
        if (status == 0xff) {
            const unsigned char type = b[pos++];
            const unsigned char len = b[pos++];
            pos += len;
            if (type == 0x2f) break;
            continue;
        }
        const unsigned char pitch = b[pos++];
        const unsigned char vel = b[pos++];
        if ((status & 0xf0) == 0x90 && vel > 0) {
            open.push_back({pitch, tick, -1});
        } else {
            for (auto& n : open)
                if (n.pitch == pitch && n.off_tick < 0) {
                    n.off_tick = tick;
                    done.push_back(n);
                    break;
                }
        }
    }
    return done;
}

}  // namespace

TEST_CASE("empty note list writes a valid midi file with zero notes") {
    const std::string path = tmp_path("empty.mid");
    write_midi(path, {});
    const MidiContent midi = read_midi(path);
    CHECK(midi.notes.empty());
    CHECK(midi.unmatched_note_ons == 0);
    fs::remove(path);
}

TEST_CASE("single note decodes at the right ticks with an independent reader") {
    const std::string path = tmp_path("one.mid");
    write_midi(path, {{60, 0.0, 1.0}});
    const auto notes = oracle_decode(path);
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].pitch == 60);
    CHECK(notes[0].on_tick == 0);
    // 500 ppq at 120 bpm: 1000 ticks per second
    CHECK(notes[0].off_tick == 1000);
    fs::remove(path);
}

TEST_CASE("notes -> midi -> notes round trip is tick-accurate") {
    Rng rng(77);
    std::vector<NoteEvent> notes;
    for (int i = 0; i < 40; ++i) {
        NoteEvent e;
        e.pitch = static_cast<int>(rng.uniform_int(21, 108));
        e.onset = rng.uniform(0.0, 18.0);
        e.offset = e.onset + rng.uniform(0.05, 2.0);
        notes.push_back(e);
    }
    std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset < b.onset || (a.onset == b.onset && a.pitch < b.pitch);
    });

    const std::string path = tmp_path("roundtrip.mid");
    write_midi(path, notes);
    const MidiContent midi = read_midi(path);
    REQUIRE(midi.notes.size() == notes.size());
    // tick quantization at 1000 ticks/s is 0.5 ms at worst, far below one frame
    for (size_t i = 0; i < notes.size(); ++i) {
        CHECK(midi.notes[i].pitch == notes[i].pitch);
        CHECK(midi.notes[i].onset == doctest::Approx(notes[i].onset).epsilon(1e-3));
        CHECK(midi.notes[i].offset == doctest::Approx(notes[i].offset).epsilon(1e-3));
    }
    fs::remove(path);
}

TEST_CASE("roll -> midi -> roll is the identity for binary rolls") {
    Rng rng(5);
    PianoRoll roll;
    roll.frame_rate = 31.25;
    roll.data = matf(kNumPitches, 128, 0.0f);
    for (auto& v : roll.data.v) v = rng.uniform() < 0.12 ? 1.0f : 0.0f;

    const std::string path = tmp_path("identity.mid");
    roll_to_midi(roll, path);
    const PianoRoll back = midi_to_roll(path, roll.frame_rate, roll.frames());
    CHECK(back.data.v == roll.data.v);
    fs::remove(path);
}

TEST_CASE("midi_to_roll floor arithmetic and range drops") {
    const std::string path = tmp_path("raster.mid");
    write_midi(path, {{60, 0.0, 0.5}, {5, 0.2, 0.8}});
    int dropped = 0;
    const PianoRoll roll = midi_to_roll(path, 31.25, 32, &dropped);
    CHECK(dropped == 1);
    const int row = pitch_to_row(60);
    for (int j = 0; j < 15; ++j) CHECK(roll.data.at(row, j) == 1.0f);
    CHECK(roll.data.at(row, 15) == 0.0f);
    fs::remove(path);
}

TEST_CASE("midi with zero notes rasterizes to silence") {
    const std::string path = tmp_path("silence.mid");
    write_midi(path, {});
    const PianoRoll roll = midi_to_roll(path, 31.25, 64);
    for (const float v : roll.data.v) CHECK(v == 0.0f);
    fs::remove(path);
}

TEST_CASE("reader rejects malformed input") {
    const std::string path = tmp_path("garbage.mid");
    std::ofstream(path, std::ios::binary) << "this is not midi at all";
    CHECK_THROWS_AS(read_midi(path), parse_error);
    fs::remove(path);
    CHECK_THROWS_AS(read_midi("/nonexistent/nowhere.mid"), io_error);
}

TEST_CASE("running status and note-on velocity zero are handled") {
    // hand-assembled format-0 file: note-on ch0 p60 v64, then running-status
    // note-on p60 v0 (acts as note-off) after 480 ticks
    const std::string path = tmp_path("running.mid");
    std::ofstream f(path, std::ios::binary);
    const unsigned char bytes[] = {
        'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0,
        'M', 'T', 'r', 'k', 0, 0, 0, 12,
        0x00, 0x90, 60, 64,
        0x83, 0x60, 60, 0,  // delta 480, running status
        0x00, 0xff, 0x2f, 0x00};
    f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    f.close();
    const MidiContent midi = read_midi(path);
    REQUIRE(midi.notes.size() == 1);
    CHECK(midi.notes[0].pitch == 60);
    CHECK(midi.notes[0].onset == doctest::Approx(0.0));
    CHECK(midi.notes[0].offset == doctest::Approx(0.5));
    fs::remove(path);
}

TEST_CASE("tempo changes shift seconds correctly") {
    // division 480; tempo 500000 for the first 480 ticks, then 250000
    const std::string path = tmp_path("tempo.mid");
    std::ofstream f(path, std::ios::binary);
    const unsigned char bytes[] = {
        'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0,
        'M', 'T', 'r', 'k', 0, 0, 0, 21,
        0x00, 0x90, 70, 64,
        0x83, 0x60, 0xff, 0x51, 0x03, 0x03, 0xd0, 0x90,  // t=480: 250000 us/qn
        0x83, 0x60, 0x80, 70, 0,                         // 480 more ticks
        0x00, 0xff, 0x2f, 0x00};
    f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    f.close();
    const MidiContent midi = read_midi(path);
    REQUIRE(midi.notes.size() == 1);
    CHECK(midi.notes[0].onset == doctest::Approx(0.0));
    // 480 ticks at 500 ms/qn + 480 ticks at 250 ms/qn
    CHECK(midi.notes[0].offset == doctest::Approx(0.75));
    fs::remove(path);
}
