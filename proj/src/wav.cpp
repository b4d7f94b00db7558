#include "diffroll/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "diffroll/common.hpp"

namespace diffroll {

namespace {

uint32_t rd_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::string& s, uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void wr_u16(std::string& s, uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open wav file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw parse_error("not a RIFF/WAVE file: " + path);

    int channels = 0, bits = 0, rate = 0, format = 0;
    size_t data_off = 0, data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const uint32_t len = rd_u32(bytes.data() + pos + 4);
        const size_t body = pos + 8;
        if (body + len > bytes.size()) break;
        if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
            format = rd_u16(bytes.data() + body);
            channels = rd_u16(bytes.data() + body + 2);
            rate = static_cast<int>(rd_u32(bytes.data() + body + 4));
            bits = rd_u16(bytes.data() + body + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_off = body;
            data_len = len;
        }
        pos = body + len + (len & 1);  // chunks are word-aligned
    }

    if (channels <= 0 || rate <= 0 || data_off == 0)
        throw parse_error("wav missing fmt/data chunk: " + path);
    const bool pcm = format == 1;
    const bool f32 = format == 3;
    if (!pcm && !f32) throw parse_error("unsupported wav format tag: " + path);
    if (pcm && bits != 16 && bits != 24 && bits != 32)
        throw parse_error("unsupported pcm bit depth: " + path);
    if (f32 && bits != 32) throw parse_error("unsupported float bit depth: " + path);

    const size_t bytes_per_sample = static_cast<size_t>(bits) / 8;
    const size_t frame_size = bytes_per_sample * channels;
    const size_t frames = data_len / frame_size;

    WavData out;
    out.sample_rate = rate;
    out.samples.resize(frames);
    const unsigned char* d = bytes.data() + data_off;
    for (size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
            const unsigned char* s = d + i * frame_size + c * bytes_per_sample;
            double v = 0.0;
            if (f32) {
                float fv;
                std::memcpy(&fv, s, 4);
                v = fv;
            } else if (bits == 16) {
                const int16_t iv = static_cast<int16_t>(s[0] | (s[1] << 8));
                v = iv / 32768.0;
            } else if (bits == 24) {
                int32_t iv = s[0] | (s[1] << 8) | (s[2] << 16);
                if (iv & 0x800000) iv |= ~0xffffff;
                v = iv / 8388608.0;
            } else {
                int32_t iv;
                std::memcpy(&iv, s, 4);
                v = iv / 2147483648.0;
            }
            acc += v;
        }
        out.samples[i] = static_cast<float>(acc / channels);
    }
    return out;
}

void write_wav(const std::string& path, const std::vector<float>& samples,
               int sample_rate) {
    check_arg(sample_rate > 0, "write_wav: sample_rate must be positive");
    std::string s;
    s.reserve(44 + samples.size() * 2);
    const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
    s += "RIFF";
    wr_u32(s, 36 + data_len);
    s += "WAVE";
    s += "fmt ";
    wr_u32(s, 16);
    wr_u16(s, 1);  // PCM
    wr_u16(s, 1);  // mono
    wr_u32(s, static_cast<uint32_t>(sample_rate));
    wr_u32(s, static_cast<uint32_t>(sample_rate) * 2);
    wr_u16(s, 2);
    wr_u16(s, 16);
    s += "data";
    wr_u32(s, data_len);
    for (const float x : samples) {
        const double c = std::clamp(static_cast<double>(x), -1.0, 1.0);
        const auto q = static_cast<int16_t>(std::lrint(c * 32767.0));
        wr_u16(s, static_cast<uint16_t>(q));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write wav file: " + path);
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) throw io_error("short write: " + path);
}

}  // namespace diffroll
