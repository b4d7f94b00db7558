#pragma once

#include <string>
#include <vector>

#include "diffroll/common.hpp"
#include "diffroll/mat.hpp"

namespace diffroll {

// Mask sentinel for dropped-out / inpainted conditioner columns.
constexpr float kMelMaskValue = -1.0f;

// Everything the conditioner computation depends on. Stored in checkpoints and
// compared verbatim at inference so train/test features match exactly.
struct FeatureConfig {
    int sample_rate = 16000;
    int hop_length = 512;
    int window_size = 2048;
    int mel_bins = 229;
    double fmin_hz = 0.0;
    double fmax_hz = 8000.0;
    // log compression floor and the fixed affine map onto [0, 1]
    double log_floor = 1e-5;
    double log_lo = -11.512925464970229;  // ln(log_floor)
    double log_hi = 6.931471805599453;    // ln(1024), covers a full-scale windowed sine

    double frame_rate() const {
        return static_cast<double>(sample_rate) / hop_length;
    }

    bool operator==(const FeatureConfig&) const = default;
    std::string fingerprint() const;  // hash key component for caching
};

struct AudioSegment {
    std::vector<float> samples;  // mono at FeatureConfig::sample_rate
    int sample_rate = 16000;
};

// 229 x tau conditioner. Unmasked entries lie in [0, 1]; masked columns are
// exactly -1.
struct MelConditioner {
    matf data;

    int frames() const { return data.cols; }
    int bins() const { return data.rows; }
};

class MelExtractor {
public:
    explicit MelExtractor(FeatureConfig cfg = {});

    const FeatureConfig& config() const { return cfg_; }

    // Loads any supported audio file and resamples to the configured rate,
    // averaging channels to mono. 16 kHz mono input passes through bit-exactly.
    AudioSegment load_and_resample(const std::string& path) const;

    // Magnitude mel spectrogram -> ln(mag + floor) -> fixed affine map to [0,1].
    // tau = floor(n_samples / hop); frame i is centered on sample i*hop with
    // reflection padding at the edges.
    MelConditioner conditioner(const AudioSegment& seg) const;

private:
    FeatureConfig cfg_;
    matd filterbank_;  // mel_bins x (window/2 + 1), triangular, unit peak
    std::vector<double> window_;
};

// Sets every selected frame's full column to the -1 sentinel. The selector must
// have exactly tau entries.
MelConditioner apply_mask(const MelConditioner& c, const std::vector<uint8_t>& frame_mask);

// Full mask: the unconditional input.
MelConditioner apply_full_mask(const MelConditioner& c);

// All -1 conditioner of a given length (for generation without audio).
MelConditioner blank_conditioner(int mel_bins, int frames);

}  // namespace diffroll
