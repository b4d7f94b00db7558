#pragma once

#include <string>
#include <vector>

namespace diffroll {

struct WavData {
    std::vector<float> samples;  // mono, [-1, 1]
    int sample_rate = 0;
};

// Reads RIFF/WAVE with 16/24/32-bit PCM or 32-bit float payloads. Multi-channel
// input is averaged down to mono.
WavData read_wav(const std::string& path);

// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] then rounded.
void write_wav(const std::string& path, const std::vector<float>& samples,
               int sample_rate);

}  // namespace diffroll
