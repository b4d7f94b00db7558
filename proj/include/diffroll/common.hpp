#pragma once

#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace diffroll {

// Error taxonomy: invalid_argument for contract violations, shape_error for
// mismatched tensor dimensions, io_error for file problems, parse_error for
// malformed input files, numerical_error for domain violations that indicate
// a bug rather than bad input.
struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_arg(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

inline void check_shape(bool ok, const std::string& msg) {
    if (!ok) throw shape_error(msg);
}

// FNV-1a, used for cache keys and provenance hashes (not cryptographic).
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

std::string hex64(uint64_t v);

}  // namespace diffroll
