#include "diffroll/resample.hpp"

#include <cmath>
#include <cstdint>

#include "diffroll/common.hpp"

namespace diffroll {

namespace {

const double kPi = 3.14159265358979323846;

double sinc(double x) {
    if (std::fabs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

std::vector<float> resample(const std::vector<float>& in, int in_rate, int out_rate) {
    check_arg(in_rate > 0 && out_rate > 0, "resample: rates must be positive");
    if (in_rate == out_rate) return in;
    if (in.empty()) return {};

    const double ratio = static_cast<double>(in_rate) / out_rate;
    // Anti-alias cutoff just below the narrower Nyquist, in input-sample units.
    const double cutoff = 0.95 * std::min(1.0, 1.0 / ratio);
    const double stretch = std::max(1.0, ratio);
    const int half_width = static_cast<int>(std::ceil(32.0 * stretch));

    const auto n_out =
        static_cast<size_t>(static_cast<uint64_t>(in.size()) * out_rate / in_rate);
    std::vector<float> out(n_out);

    for (size_t n = 0; n < n_out; ++n) {
        const double center = static_cast<double>(n) * ratio;
        const auto k0 = static_cast<int64_t>(std::ceil(center - half_width));
        const auto k1 = static_cast<int64_t>(std::floor(center + half_width));
        double acc = 0.0, wsum = 0.0;
        for (int64_t k = k0; k <= k1; ++k) {
            const double x = static_cast<double>(k) - center;
            // Hann-windowed sinc; normalizing by the window sum flattens DC ripple.
            const double win = 0.5 + 0.5 * std::cos(kPi * x / half_width);
            const double w = cutoff * sinc(cutoff * x) * win;
            wsum += w;
            if (k >= 0 && k < static_cast<int64_t>(in.size()))
                acc += in[static_cast<size_t>(k)] * w;
        }
        out[n] = static_cast<float>(wsum != 0.0 ? acc / wsum : 0.0);
    }
    return out;
}

}  // namespace diffroll
