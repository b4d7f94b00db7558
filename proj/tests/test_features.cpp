#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "diffroll/features.hpp"
#include "diffroll/fft.hpp"
#include "diffroll/resample.hpp"
#include "diffroll/rng.hpp"
#include "diffroll/wav.hpp"

using namespace diffroll;
namespace fs = std::filesystem;

namespace {

std::vector<float> sine(double freq, int rate, int n, double amp = 0.5) {
    std::vector<float> out(static_cast<size_t>(n));
    const double w = 2.0 * 3.14159265358979323846 * freq / rate;
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = static_cast<float>(amp * std::sin(w * i));
    return out;
}

// Spectral-peak oracle with parabolic interpolation.
double dominant_frequency(const std::vector<float>& x, int rate) {
    const size_t n = 16384;
    std::vector<double> frame(n, 0.0);
    for (size_t i = 0; i < n && i < x.size(); ++i) {
        const double hann = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / n);
        frame[i] = x[i] * hann;
    }
    const std::vector<double> mag = real_magnitude_spectrum(frame, n);
    size_t peak = 1;
    for (size_t k = 1; k + 1 < mag.size(); ++k)
        if (mag[k] > mag[peak]) peak = k;
    const double a = mag[peak - 1], b = mag[peak], c = mag[peak + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    return (static_cast<double>(peak) + shift) * rate / static_cast<double>(n);
}

}  // namespace

TEST_CASE("fft agrees with the direct dft on a small case") {
    Rng rng(2);
    const size_t n = 64;
    std::vector<std::complex<double>> a(n);
    for (auto& v : a) v = {rng.gaussian(), rng.gaussian()};
    auto fftd = a;
    fft_inplace(fftd);
    for (size_t k = 0; k < n; k += 7) {
        std::complex<double> direct{0.0, 0.0};
        for (size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * 3.14159265358979323846 * k * j / n;
            direct += a[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        CHECK(std::abs(fftd[k] - direct) < 1e-9);
    }
    // inverse round trip
    fft_inplace(fftd, true);
    for (size_t j = 0; j < n; ++j) CHECK(std::abs(fftd[j] - a[j]) < 1e-12);
}

TEST_CASE("resample at matching rates is a bit-exact pass-through") {
    const auto x = sine(440.0, 16000, 16000);
    const auto y = resample(x, 16000, 16000);
    CHECK(y == x);
}

TEST_CASE("32 kHz to 16 kHz halves the sample count") {
    const auto x = sine(440.0, 32000, 32001);
    const auto y = resample(x, 32000, 16000);
    const auto n = static_cast<long>(y.size());
    CHECK(std::abs(n - 16000) <= 1);
}

TEST_CASE("440 Hz survives 44.1 kHz -> 16 kHz within 1 Hz") {
    const auto x = sine(440.0, 44100, 44100 * 2);
    const auto y = resample(x, 44100, 16000);
    CHECK(dominant_frequency(y, 16000) == doctest::Approx(440.0).epsilon(1.0 / 440.0));
}

TEST_CASE("upsampling keeps the tone as well") {
    const auto x = sine(440.0, 8000, 8000 * 2);
    const auto y = resample(x, 8000, 16000);
    CHECK(y.size() == x.size() * 2);
    CHECK(dominant_frequency(y, 16000) == doctest::Approx(440.0).epsilon(1.0 / 440.0));
}

TEST_CASE("load_and_resample averages stereo to mono and keeps 16 kHz intact") {
    const std::string path = (fs::temp_directory_path() / "diffroll_feat_mono.wav").string();
    const auto x = sine(440.0, 16000, 4096, 0.4);
    write_wav(path, x, 16000);
    MelExtractor ex;
    const AudioSegment seg = ex.load_and_resample(path);
    CHECK(seg.sample_rate == 16000);
    REQUIRE(seg.samples.size() == x.size());
    // 16-bit quantization only
    for (size_t i = 0; i < x.size(); i += 97)
        CHECK(seg.samples[i] == doctest::Approx(x[i]).epsilon(1e-3));
    fs::remove(path);

    CHECK_THROWS_AS(ex.load_and_resample("/no/such/file.wav"), io_error);
}

TEST_CASE("conditioner shape: 327680 samples at hop 512 give 640 frames") {
    MelExtractor ex;
    AudioSegment seg;
    seg.samples = sine(440.0, 16000, 327680);
    const MelConditioner c = ex.conditioner(seg);
    CHECK(c.bins() == 229);
    CHECK(c.frames() == 640);
    CHECK(ex.config().frame_rate() == doctest::Approx(31.25));
}

TEST_CASE("digital silence maps to a constant conditioner") {
    MelExtractor ex;
    AudioSegment seg;
    seg.samples.assign(8192, 0.0f);
    const MelConditioner c = ex.conditioner(seg);
    const float first = c.data.v[0];
    for (const float v : c.data.v) CHECK(v == first);
    CHECK(first == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("conditioner values stay inside [0,1] on random audio") {
    Rng rng(31);
    MelExtractor ex;
    for (int trial = 0; trial < 100; ++trial) {
        AudioSegment seg;
        const int n = 2048 + static_cast<int>(rng.uniform_int(0, 6144));
        seg.samples.resize(static_cast<size_t>(n));
        for (auto& v : seg.samples) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        const MelConditioner c = ex.conditioner(seg);
        for (const float v : c.data.v) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("a sine excites the mel bins around its frequency") {
    MelExtractor ex;
    AudioSegment seg;
    seg.samples = sine(1000.0, 16000, 32768);
    const MelConditioner c = ex.conditioner(seg);
    // find the strongest bin in a middle frame
    int best = 0;
    for (int m = 0; m < c.bins(); ++m)
        if (c.data.at(m, 32) > c.data.at(best, 32)) best = m;
    // 1 kHz on the 229-bin 0..8k HTK mel axis sits well inside the lower half
    CHECK(best > 30);
    CHECK(best < 160);
    CHECK(c.data.at(best, 32) > 0.5f);
}

TEST_CASE("too-short segments are rejected") {
    MelExtractor ex;
    AudioSegment seg;
    seg.samples.assign(1024, 0.0f);
    CHECK_THROWS_AS(ex.conditioner(seg), std::invalid_argument);
}

TEST_CASE("feature extraction is bit-deterministic") {
    Rng rng(8);
    AudioSegment seg;
    seg.samples.resize(16384);
    for (auto& v : seg.samples) v = static_cast<float>(rng.uniform(-0.8, 0.8));
    MelExtractor ex1, ex2;
    const MelConditioner a = ex1.conditioner(seg);
    const MelConditioner b = ex2.conditioner(seg);
    CHECK(a.data.v == b.data.v);
}

TEST_CASE("apply_mask: empty selector, locality, idempotence, full mask") {
    MelExtractor ex;
    AudioSegment seg;
    seg.samples = sine(880.0, 16000, 16384, 0.3);
    const MelConditioner c = ex.conditioner(seg);
    const int tau = c.frames();

    std::vector<uint8_t> none(static_cast<size_t>(tau), 0);
    CHECK(apply_mask(c, none).data.v == c.data.v);

    std::vector<uint8_t> some(static_cast<size_t>(tau), 0);
    for (int j = 10; j <= 20 && j < tau; ++j) some[static_cast<size_t>(j)] = 1;
    const MelConditioner masked = apply_mask(c, some);
    for (int m = 0; m < c.bins(); ++m) {
        CHECK(masked.data.at(m, 9) == c.data.at(m, 9));
        CHECK(masked.data.at(m, 10) == kMelMaskValue);
        CHECK(masked.data.at(m, 20) == kMelMaskValue);
        CHECK(masked.data.at(m, 21) == c.data.at(m, 21));
    }

    // idempotence
    CHECK(apply_mask(masked, some).data.v == masked.data.v);

    // full mask equals the unconditional sentinel everywhere
    const MelConditioner full = apply_full_mask(c);
    for (const float v : full.data.v) CHECK(v == -1.0f);

    std::vector<uint8_t> wrong(static_cast<size_t>(tau + 1), 0);
    CHECK_THROWS_AS(apply_mask(c, wrong), shape_error);
}

TEST_CASE("wav reader handles stereo and float formats") {
    // hand-build a stereo 16-bit file: L = 0.5, R = -0.5 -> mono 0
    const std::string path = (fs::temp_directory_path() / "diffroll_stereo.wav").string();
    {
        std::vector<float> interleaved;
        std::string s;
        auto u32 = [&s](uint32_t v) {
            for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        };
        auto u16 = [&s](uint16_t v) {
            s.push_back(static_cast<char>(v & 0xff));
            s.push_back(static_cast<char>((v >> 8) & 0xff));
        };
        const int frames = 100;
        s += "RIFF";
        u32(36 + frames * 4);
        s += "WAVEfmt ";
        u32(16);
        u16(1);
        u16(2);
        u32(16000);
        u32(16000 * 4);
        u16(4);
        u16(16);
        s += "data";
        u32(frames * 4);
        for (int i = 0; i < frames; ++i) {
            u16(static_cast<uint16_t>(16384));   // +0.5
            u16(static_cast<uint16_t>(-16384));  // -0.5
        }
        std::ofstream f(path, std::ios::binary);
        f << s;
    }
    const WavData wav = read_wav(path);
    CHECK(wav.sample_rate == 16000);
    REQUIRE(wav.samples.size() == 100);
    for (const float v : wav.samples) CHECK(v == doctest::Approx(0.0).epsilon(1e-4));
    fs::remove(path);
}
