#pragma once

#include <string>
#include <vector>

#include "diffroll/pianoroll.hpp"

namespace diffroll {

struct MidiNote {
    int pitch = 0;  // raw MIDI note number, 0..127
    double onset = 0.0;
    double offset = 0.0;
};

struct MidiContent {
    std::vector<MidiNote> notes;       // sorted by (onset, pitch)
    int unmatched_note_ons = 0;        // note-ons without a matching note-off
};

// Standard MIDI file reader (formats 0 and 1). Ticks are converted to seconds
// through the merged tempo map; velocity is read but discarded.
MidiContent read_midi(const std::string& path);

// Single-track format-0 writer at 480 PPQ, 120 bpm, fixed velocity 64.
void write_midi(const std::string& path, const std::vector<NoteEvent>& notes);

// Reads a MIDI file and rasterizes it. Pitches outside the 88-key range are
// dropped and counted in *dropped_pitches.
PianoRoll midi_to_roll(const std::string& path, double frame_rate, int num_frames,
                       int* dropped_pitches = nullptr);

// Run-length extraction followed by MIDI export.
void roll_to_midi(const PianoRoll& roll, const std::string& path);

}  // namespace diffroll
