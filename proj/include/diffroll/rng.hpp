#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>

namespace diffroll {

// Self-contained xoshiro256++ generator. std::mt19937 would pin the engine but
// std::normal_distribution is implementation-defined, so reproducibility across
// toolchains requires owning the whole sampling path. Streams are forked with
// splitmix64 so batched runs match per-sample runs bit for bit.
class Rng {
public:
    explicit Rng(uint64_t seed) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
        have_spare_ = false;
        spare_ = 0.0;
    }

    // Independent stream for (seed, stream_id). Forking does not disturb this
    // generator's state.
    Rng fork(uint64_t stream_id) const {
        Rng child(0);
        uint64_t x = s_[0] ^ (0x9e3779b97f4a7c15ull + stream_id);
        x ^= s_[2] * 0xbf58476d1ce4e5b9ull;
        for (auto& w : child.s_) w = splitmix64(x);
        child.have_spare_ = false;
        return child;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // Rejection sampling keeps the draw exactly uniform.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return lo + static_cast<int64_t>(v % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; the spare value is cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double two_pi = 6.283185307179586476925286766559;
        const double u = 1.0 - uniform();  // (0, 1], keeps log finite
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = two_pi * uniform();
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::array<uint64_t, 6> state() const {
        return {s_[0], s_[1], s_[2], s_[3], have_spare_ ? 1ull : 0ull,
                std::bit_cast<uint64_t>(spare_)};
    }

    void restore(const std::array<uint64_t, 6>& st) {
        s_ = {st[0], st[1], st[2], st[3]};
        have_spare_ = st[4] != 0;
        spare_ = std::bit_cast<double>(st[5]);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::array<uint64_t, 4> s_{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace diffroll
