#include "diffroll/pianoroll.hpp"

#include <algorithm>
#include <cmath>

namespace diffroll {

bool PianoRoll::is_binary() const {
    for (const float v : data.v)
        if (v != 0.0f && v != 1.0f) return false;
    return true;
}

PianoRoll binarize(const matf& raw, double frame_rate, double threshold) {
    check_arg(frame_rate > 0.0, "binarize: frame_rate must be positive");
    PianoRoll out;
    out.frame_rate = frame_rate;
    out.data = matf(raw.rows, raw.cols);
    const auto thr = static_cast<float>(threshold);
    for (size_t i = 0; i < raw.size(); ++i)
        out.data.v[i] = raw.v[i] > thr ? 1.0f : 0.0f;
    return out;
}

std::vector<NoteEvent> roll_to_notes(const PianoRoll& roll) {
    check_arg(roll.data.rows == kNumPitches, "roll_to_notes: roll must have 88 rows");
    check_arg(roll.frame_rate > 0.0, "roll_to_notes: frame_rate must be positive");
    check_arg(roll.is_binary(), "roll_to_notes: input must be binary");

    std::vector<NoteEvent> notes;
    for (int r = 0; r < kNumPitches; ++r) {
        const float* row = roll.data.row(r);
        int run_start = -1;
        for (int j = 0; j <= roll.frames(); ++j) {
            const bool on = j < roll.frames() && row[j] == 1.0f;
            if (on && run_start < 0) run_start = j;
            if (!on && run_start >= 0) {
                NoteEvent e;
                e.pitch = row_to_pitch(r);
                e.onset = run_start / roll.frame_rate;
                e.offset = j / roll.frame_rate;
                notes.push_back(e);
                run_start = -1;
            }
        }
    }
    std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset < b.onset || (a.onset == b.onset && a.pitch < b.pitch);
    });
    return notes;
}

PianoRoll notes_to_roll(const std::vector<NoteEvent>& notes, double frame_rate,
                        int num_frames, int* dropped_pitches) {
    check_arg(frame_rate > 0.0, "notes_to_roll: frame_rate must be positive");
    check_arg(num_frames >= 0, "notes_to_roll: num_frames must be non-negative");

    PianoRoll out;
    out.frame_rate = frame_rate;
    out.data = matf(kNumPitches, num_frames, 0.0f);
    int dropped = 0;
    for (const NoteEvent& e : notes) {
        if (e.pitch < kLowestMidiPitch || e.pitch > kHighestMidiPitch) {
            ++dropped;
            continue;
        }
        check_arg(e.offset > e.onset, "notes_to_roll: offset must exceed onset");
        // The epsilon keeps times that sit exactly on a frame boundary from
        // flooring one frame low after round-tripping through file formats.
        const auto a = static_cast<int64_t>(std::floor(e.onset * frame_rate + 1e-9));
        const auto b = static_cast<int64_t>(std::floor(e.offset * frame_rate + 1e-9));
        const int64_t lo = std::max<int64_t>(a, 0);
        const int64_t hi = std::min<int64_t>(b, num_frames);
        float* row = out.data.row(pitch_to_row(e.pitch));
        for (int64_t j = lo; j < hi; ++j) row[j] = 1.0f;
    }
    if (dropped_pitches) *dropped_pitches = dropped;
    return out;
}

}  // namespace diffroll
