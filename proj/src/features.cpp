#include "diffroll/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "diffroll/fft.hpp"
#include "diffroll/resample.hpp"
#include "diffroll/wav.hpp"

namespace diffroll {

namespace {

// HTK mel scale.
double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

std::string FeatureConfig::fingerprint() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "sr=%d hop=%d win=%d mels=%d fmin=%.17g fmax=%.17g floor=%.17g lo=%.17g hi=%.17g",
                  sample_rate, hop_length, window_size, mel_bins, fmin_hz, fmax_hz,
                  log_floor, log_lo, log_hi);
    return buf;
}

MelExtractor::MelExtractor(FeatureConfig cfg) : cfg_(cfg) {
    check_arg(cfg_.sample_rate > 0 && cfg_.hop_length > 0 && cfg_.mel_bins > 0,
              "MelExtractor: invalid config");
    check_arg((cfg_.window_size & (cfg_.window_size - 1)) == 0,
              "MelExtractor: window size must be a power of two");

    const int n_bins = cfg_.window_size / 2 + 1;
    filterbank_ = matd(cfg_.mel_bins, n_bins, 0.0);

    const double mel_lo = hz_to_mel(cfg_.fmin_hz);
    const double mel_hi = hz_to_mel(cfg_.fmax_hz);
    std::vector<double> edges(cfg_.mel_bins + 2);
    for (int i = 0; i < cfg_.mel_bins + 2; ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg_.mel_bins + 1));

    const double bin_hz = static_cast<double>(cfg_.sample_rate) / cfg_.window_size;
    for (int m = 0; m < cfg_.mel_bins; ++m) {
        const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = k * bin_hz;
            double w = 0.0;
            if (f > f0 && f < f2) {
                w = (f <= f1) ? (f - f0) / (f1 - f0) : (f2 - f) / (f2 - f1);
            }
            filterbank_.at(m, k) = w;
        }
    }

    // Periodic Hann.
    window_.resize(cfg_.window_size);
    const double pi = 3.14159265358979323846;
    for (int n = 0; n < cfg_.window_size; ++n)
        window_[n] = 0.5 - 0.5 * std::cos(2.0 * pi * n / cfg_.window_size);
}

AudioSegment MelExtractor::load_and_resample(const std::string& path) const {
    const WavData wav = read_wav(path);
    AudioSegment seg;
    seg.sample_rate = cfg_.sample_rate;
    seg.samples = resample(wav.samples, wav.sample_rate, cfg_.sample_rate);
    return seg;
}

MelConditioner MelExtractor::conditioner(const AudioSegment& seg) const {
    check_arg(seg.sample_rate == cfg_.sample_rate,
              "conditioner: segment not at the configured sample rate");
    const auto n = static_cast<int64_t>(seg.samples.size());
    check_arg(n >= cfg_.window_size, "conditioner: segment shorter than one window");

    const int tau = static_cast<int>(n / cfg_.hop_length);
    const int half = cfg_.window_size / 2;
    const int n_bins = cfg_.window_size / 2 + 1;
    const double scale = 1.0 / (cfg_.log_hi - cfg_.log_lo);

    MelConditioner out;
    out.data = matf(cfg_.mel_bins, tau);

    std::vector<double> frame(cfg_.window_size);
    std::vector<double> mel(cfg_.mel_bins);
    for (int i = 0; i < tau; ++i) {
        const int64_t center = static_cast<int64_t>(i) * cfg_.hop_length;
        for (int j = 0; j < cfg_.window_size; ++j) {
            int64_t idx = center - half + j;
            // Reflection padding without repeating the edge sample.
            if (idx < 0) idx = -idx;
            if (idx >= n) idx = 2 * n - 2 - idx;
            frame[j] = static_cast<double>(seg.samples[static_cast<size_t>(idx)]) *
                       window_[j];
        }
        const std::vector<double> mag =
            real_magnitude_spectrum(frame, static_cast<size_t>(cfg_.window_size));
        for (int m = 0; m < cfg_.mel_bins; ++m) {
            double acc = 0.0;
            const double* fb = filterbank_.row(m);
            for (int k = 0; k < n_bins; ++k) acc += fb[k] * mag[k];
            mel[m] = acc;
        }
        for (int m = 0; m < cfg_.mel_bins; ++m) {
            const double lv = std::log(mel[m] + cfg_.log_floor);
            const double v = std::clamp((lv - cfg_.log_lo) * scale, 0.0, 1.0);
            out.data.at(m, i) = static_cast<float>(v);
        }
    }
    return out;
}

MelConditioner apply_mask(const MelConditioner& c, const std::vector<uint8_t>& frame_mask) {
    check_shape(static_cast<int>(frame_mask.size()) == c.frames(),
                "apply_mask: selector length != frame count");
    MelConditioner out = c;
    for (int j = 0; j < c.frames(); ++j) {
        if (!frame_mask[static_cast<size_t>(j)]) continue;
        for (int m = 0; m < c.bins(); ++m) out.data.at(m, j) = kMelMaskValue;
    }
    return out;
}

MelConditioner apply_full_mask(const MelConditioner& c) {
    MelConditioner out = c;
    out.data.fill(kMelMaskValue);
    return out;
}

MelConditioner blank_conditioner(int mel_bins, int frames) {
    check_arg(mel_bins > 0 && frames > 0, "blank_conditioner: bad shape");
    MelConditioner out;
    out.data = matf(mel_bins, frames, kMelMaskValue);
    return out;
}

}  // namespace diffroll
