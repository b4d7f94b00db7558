#pragma once

#include <vector>

#include "diffroll/common.hpp"
#include "diffroll/mat.hpp"

namespace diffroll {

constexpr int kNumPitches = 88;
constexpr int kLowestMidiPitch = 21;   // A0
constexpr int kHighestMidiPitch = 108; // C8

inline int pitch_to_row(int midi_pitch) { return midi_pitch - kLowestMidiPitch; }
inline int row_to_pitch(int row) { return row + kLowestMidiPitch; }

// 88 x tau matrix, rows ascending from A0. Ground truth holds exactly {0, 1};
// raw model output is unbounded until binarized.
struct PianoRoll {
    matf data;
    double frame_rate = 0.0;  // frames per second

    int frames() const { return data.cols; }
    bool is_binary() const;
};

struct NoteEvent {
    int pitch = 0;      // MIDI note number in [21, 108]
    double onset = 0.0; // seconds
    double offset = 0.0;
};

// 1.0 where raw > threshold, else 0.0. Ties map to silence.
PianoRoll binarize(const matf& raw, double frame_rate, double threshold = 0.5);

// Maximal runs of consecutive 1-frames become notes: onset a/fr, offset (b+1)/fr
// for a run [a, b]. Sorted by (onset, pitch). Input must be binary.
std::vector<NoteEvent> roll_to_notes(const PianoRoll& roll);

// Rasterizes notes onto a frame grid: frames [floor(on*fr), floor(off*fr)) are
// set per note. Pitches outside [21, 108] are dropped and counted.
PianoRoll notes_to_roll(const std::vector<NoteEvent>& notes, double frame_rate,
                        int num_frames, int* dropped_pitches = nullptr);

}  // namespace diffroll
