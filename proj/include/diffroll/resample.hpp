#pragma once

#include <vector>

namespace diffroll {

// Windowed-sinc resampler. Identity (bit-exact copy) when rates already match.
// Output length is floor(n_in * out_rate / in_rate).
std::vector<float> resample(const std::vector<float>& in, int in_rate, int out_rate);

}  // namespace diffroll
