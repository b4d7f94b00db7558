#include "diffroll/schedule.hpp"

#include <cstdio>

namespace diffroll {

namespace {
constexpr double kAlphaFirst = 0.9999;
constexpr double kAlphaLast = 0.98;
}  // namespace

NoiseSchedule NoiseSchedule::linear(int T, SigmaMode mode) {
    check_arg(T >= 2, "NoiseSchedule::linear: T must be >= 2");
    NoiseSchedule s;
    s.T_ = T;
    s.mode_ = mode;
    s.alphas_.assign(T + 1, 1.0);
    s.alpha_bars_.assign(T + 1, 1.0);
    s.sigmas_ddpm_.assign(T + 1, 0.0);

    const double step = (kAlphaLast - kAlphaFirst) / (T - 1);
    double bar = 1.0;
    for (int t = 1; t <= T; ++t) {
        // Endpoint-inclusive interpolation in alpha itself.
        const double a = (t == T) ? kAlphaLast : kAlphaFirst + (t - 1) * step;
        s.alphas_[t] = a;
        bar *= a;
        s.alpha_bars_[t] = bar;
    }
    for (int t = 1; t <= T; ++t) {
        const double num = 1.0 - s.alpha_bars_[t - 1];
        const double den = 1.0 - s.alpha_bars_[t];
        s.sigmas_ddpm_[t] = std::sqrt(num / den) * std::sqrt(1.0 - s.alphas_[t]);
    }
    return s;
}

std::string NoiseSchedule::to_table_text() const {
    std::string out = "t alpha alpha_bar sigma_ddpm\n";
    char line[128];
    std::snprintf(line, sizeof(line), "0 %.17g %.17g %.17g\n", 1.0, 1.0, 0.0);
    out += line;
    for (int t = 1; t <= T_; ++t) {
        std::snprintf(line, sizeof(line), "%d %.17g %.17g %.17g\n", t, alphas_[t],
                      alpha_bars_[t], sigmas_ddpm_[t]);
        out += line;
    }
    return out;
}

const char* to_string(SigmaMode m) { return m == SigmaMode::DDPM ? "ddpm" : "ddim"; }

SigmaMode sigma_mode_from_string(const std::string& s) {
    if (s == "ddpm") return SigmaMode::DDPM;
    if (s == "ddim") return SigmaMode::DDIM;
    throw std::invalid_argument("unknown sigma mode: " + s);
}

}  // namespace diffroll
