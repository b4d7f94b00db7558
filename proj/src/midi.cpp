#include "diffroll/midi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "diffroll/common.hpp"

namespace diffroll {

namespace {

// 500 PPQ at 120 bpm puts the tick rate at exactly 1000 Hz, so onsets on the
// 31.25 Hz frame grid (32 ticks per frame) quantize without error.
constexpr int kDivision = 500;
constexpr int kTempoUsPerQuarter = 500000;  // 120 bpm
constexpr int kExportVelocity = 64;

struct Reader {
    const unsigned char* p;
    size_t n;
    size_t pos = 0;

    bool eof() const { return pos >= n; }

    uint8_t u8() {
        if (pos >= n) throw parse_error("midi: truncated file");
        return p[pos++];
    }

    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
        return v;
    }

    uint16_t u16() {
        uint16_t v = u8();
        return static_cast<uint16_t>((v << 8) | u8());
    }

    uint32_t vlq() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const uint8_t b = u8();
            v = (v << 7) | (b & 0x7f);
            if (!(b & 0x80)) return v;
        }
        throw parse_error("midi: bad variable-length quantity");
    }

    void skip(size_t k) {
        if (pos + k > n) throw parse_error("midi: truncated event");
        pos += k;
    }
};

struct RawNoteEvent {
    uint64_t tick;
    bool on;
    uint8_t pitch;
};

void vlq_write(std::string& s, uint32_t v) {
    uint8_t bytes[4];
    int k = 0;
    bytes[k++] = v & 0x7f;
    while (v >>= 7) bytes[k++] = (v & 0x7f) | 0x80;
    while (k--) s.push_back(static_cast<char>(bytes[k]));
}

}  // namespace

MidiContent read_midi(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open midi file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    Reader r{bytes.data(), bytes.size()};

    if (r.n < 14 || std::memcmp(r.p, "MThd", 4) != 0)
        throw parse_error("midi: missing MThd header: " + path);
    r.pos = 4;
    const uint32_t hdr_len = r.u32();
    const uint16_t format = r.u16();
    const uint16_t ntrks = r.u16();
    const uint16_t division = r.u16();
    if (hdr_len > 6) r.skip(hdr_len - 6);
    if (format > 1) throw parse_error("midi: unsupported format 2 file: " + path);
    if (division & 0x8000)
        throw parse_error("midi: SMPTE time division not supported: " + path);
    if (division == 0) throw parse_error("midi: zero time division: " + path);

    std::vector<RawNoteEvent> raw;
    std::map<uint64_t, uint32_t> tempo_at_tick;  // tick -> us per quarter

    for (int trk = 0; trk < ntrks; ++trk) {
        if (r.pos + 8 > r.n) throw parse_error("midi: truncated track header: " + path);
        if (std::memcmp(r.p + r.pos, "MTrk", 4) != 0)
            throw parse_error("midi: expected MTrk chunk: " + path);
        r.pos += 4;
        const uint32_t len = r.u32();
        const size_t track_end = r.pos + len;
        if (track_end > r.n) throw parse_error("midi: truncated track body: " + path);

        uint64_t tick = 0;
        uint8_t running = 0;
        while (r.pos < track_end) {
            tick += r.vlq();
            uint8_t status = r.p[r.pos];
            if (status & 0x80) {
                r.pos++;
            } else if (running & 0x80) {
                status = running;
            } else {
                throw parse_error("midi: dangling data byte: " + path);
            }

            if (status == 0xff) {  // meta
                const uint8_t type = r.u8();
                const uint32_t mlen = r.vlq();
                if (type == 0x51 && mlen == 3) {
                    const uint32_t us = (static_cast<uint32_t>(r.u8()) << 16) |
                                        (static_cast<uint32_t>(r.u8()) << 8) | r.u8();
                    tempo_at_tick[tick] = us;
                } else {
                    r.skip(mlen);
                }
                running = 0;
                continue;
            }
            if (status == 0xf0 || status == 0xf7) {  // sysex
                r.skip(r.vlq());
                running = 0;
                continue;
            }

            running = status;
            const uint8_t kind = status & 0xf0;
            switch (kind) {
                case 0x90: {
                    const uint8_t pitch = r.u8();
                    const uint8_t vel = r.u8();
                    raw.push_back({tick, vel != 0, pitch});
                    break;
                }
                case 0x80: {
                    const uint8_t pitch = r.u8();
                    r.u8();  // release velocity
                    raw.push_back({tick, false, pitch});
                    break;
                }
                case 0xa0:
                case 0xb0:
                case 0xe0:
                    r.skip(2);
                    break;
                case 0xc0:
                case 0xd0:
                    r.skip(1);
                    break;
                default:
                    throw parse_error("midi: unexpected status byte: " + path);
            }
        }
        r.pos = track_end;
    }

    // Piecewise tick -> seconds conversion over the merged tempo map.
    std::vector<std::pair<uint64_t, uint32_t>> tempi(tempo_at_tick.begin(),
                                                     tempo_at_tick.end());
    auto tick_to_seconds = [&](uint64_t tick) {
        double sec = 0.0;
        uint64_t prev_tick = 0;
        uint32_t us = kTempoUsPerQuarter;
        for (const auto& [tt, tus] : tempi) {
            if (tt >= tick) break;
            sec += static_cast<double>(tt - prev_tick) * us / (division * 1e6);
            prev_tick = tt;
            us = tus;
        }
        sec += static_cast<double>(tick - prev_tick) * us / (division * 1e6);
        return sec;
    };

    std::stable_sort(raw.begin(), raw.end(), [](const RawNoteEvent& a, const RawNoteEvent& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        return a.on < b.on;  // offs before ons at the same tick
    });

    MidiContent out;
    std::vector<std::vector<uint64_t>> open(128);
    for (const RawNoteEvent& e : raw) {
        if (e.on) {
            open[e.pitch].push_back(e.tick);
        } else if (!open[e.pitch].empty()) {
            // earliest-open-first pairing for overlapping same-pitch notes
            const uint64_t on_tick = open[e.pitch].front();
            open[e.pitch].erase(open[e.pitch].begin());
            if (e.tick > on_tick) {
                MidiNote n;
                n.pitch = e.pitch;
                n.onset = tick_to_seconds(on_tick);
                n.offset = tick_to_seconds(e.tick);
                out.notes.push_back(n);
            }
        }
    }
    for (const auto& v : open) out.unmatched_note_ons += static_cast<int>(v.size());

    std::sort(out.notes.begin(), out.notes.end(), [](const MidiNote& a, const MidiNote& b) {
        return a.onset < b.onset || (a.onset == b.onset && a.pitch < b.pitch);
    });
    return out;
}

void write_midi(const std::string& path, const std::vector<NoteEvent>& notes) {
    struct Evt {
        int64_t tick;
        bool on;
        int pitch;
    };
    const double ticks_per_sec = kDivision * 1e6 / kTempoUsPerQuarter;
    std::vector<Evt> evts;
    evts.reserve(notes.size() * 2);
    for (const NoteEvent& e : notes) {
        check_arg(e.pitch >= 0 && e.pitch <= 127, "write_midi: pitch out of MIDI range");
        check_arg(e.offset > e.onset, "write_midi: offset must exceed onset");
        evts.push_back({static_cast<int64_t>(std::llround(e.onset * ticks_per_sec)), true, e.pitch});
        evts.push_back({static_cast<int64_t>(std::llround(e.offset * ticks_per_sec)), false, e.pitch});
    }
    std::sort(evts.begin(), evts.end(), [](const Evt& a, const Evt& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        if (a.on != b.on) return !a.on;  // off first
        return a.pitch < b.pitch;
    });

    std::string trk;
    // tempo meta event at tick 0
    trk.push_back(0);
    trk.push_back(static_cast<char>(0xff));
    trk.push_back(0x51);
    trk.push_back(0x03);
    trk.push_back(static_cast<char>((kTempoUsPerQuarter >> 16) & 0xff));
    trk.push_back(static_cast<char>((kTempoUsPerQuarter >> 8) & 0xff));
    trk.push_back(static_cast<char>(kTempoUsPerQuarter & 0xff));

    int64_t prev = 0;
    for (const Evt& e : evts) {
        vlq_write(trk, static_cast<uint32_t>(e.tick - prev));
        prev = e.tick;
        trk.push_back(static_cast<char>(e.on ? 0x90 : 0x80));
        trk.push_back(static_cast<char>(e.pitch));
        trk.push_back(static_cast<char>(e.on ? kExportVelocity : 0));
    }
    // end of track
    trk.push_back(0);
    trk.push_back(static_cast<char>(0xff));
    trk.push_back(0x2f);
    trk.push_back(0x00);

    std::string out = "MThd";
    auto u32 = [&out](uint32_t v) {
        out.push_back(static_cast<char>((v >> 24) & 0xff));
        out.push_back(static_cast<char>((v >> 16) & 0xff));
        out.push_back(static_cast<char>((v >> 8) & 0xff));
        out.push_back(static_cast<char>(v & 0xff));
    };
    auto u16 = [&out](uint16_t v) {
        out.push_back(static_cast<char>((v >> 8) & 0xff));
        out.push_back(static_cast<char>(v & 0xff));
    };
    u32(6);
    u16(0);  // format 0
    u16(1);  // one track
    u16(kDivision);
    out += "MTrk";
    u32(static_cast<uint32_t>(trk.size()));
    out += trk;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write midi file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw io_error("short write: " + path);
}

PianoRoll midi_to_roll(const std::string& path, double frame_rate, int num_frames,
                       int* dropped_pitches) {
    const MidiContent midi = read_midi(path);
    std::vector<NoteEvent> notes;
    notes.reserve(midi.notes.size());
    for (const MidiNote& n : midi.notes)
        notes.push_back({n.pitch, n.onset, n.offset});
    return notes_to_roll(notes, frame_rate, num_frames, dropped_pitches);
}

void roll_to_midi(const PianoRoll& roll, const std::string& path) {
    write_midi(path, roll_to_notes(roll));
}

}  // namespace diffroll
