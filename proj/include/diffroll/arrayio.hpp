#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffroll/mat.hpp"

namespace diffroll {

// Small container format for cached rolls, conditioners, posteriorgrams and
// trajectory dumps: magic, dtype, shape, zlib-deflated payload.
void save_array(const std::string& path, const matf& m);
matf load_array(const std::string& path);

// Raw byte helpers used by the checkpoint writer as well.
std::vector<uint8_t> zlib_deflate(const uint8_t* data, size_t n);
std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t n, size_t raw_size);

}  // namespace diffroll
