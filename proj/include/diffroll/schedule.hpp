#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffroll/common.hpp"
#include "diffroll/mat.hpp"

namespace diffroll {

enum class SigmaMode { DDPM, DDIM };

// Diffusion noise schedule: alpha_t linearly interpolated from 0.9999 down to
// 0.98 inclusive, alpha_bar_t the running product with alpha_bar_0 = 1, and
// the DDPM posterior sigma table. Immutable after construction.
class NoiseSchedule {
public:
    static NoiseSchedule linear(int T, SigmaMode mode = SigmaMode::DDPM);

    int steps() const { return T_; }
    SigmaMode mode() const { return mode_; }
    void set_mode(SigmaMode m) { mode_ = m; }

    // t in [1, T]
    double alpha(int t) const {
        check_t(t);
        return alphas_[t];
    }

    // t in [0, T]; alpha_bar(0) == 1 exactly
    double alpha_bar(int t) const {
        check_arg(t >= 0 && t <= T_, "alpha_bar: t out of range");
        return alpha_bars_[t];
    }

    // DDPM posterior sigma, or 0 in DDIM mode. t in [1, T].
    double sigma(int t) const {
        check_t(t);
        return mode_ == SigmaMode::DDIM ? 0.0 : sigmas_ddpm_[t];
    }

    double sigma_ddpm(int t) const {
        check_t(t);
        return sigmas_ddpm_[t];
    }

    // Plain-text audit table: one "t alpha alpha_bar sigma" row per step,
    // round-trippable doubles.
    std::string to_table_text() const;

    bool operator==(const NoiseSchedule& o) const {
        return T_ == o.T_ && alphas_ == o.alphas_ && alpha_bars_ == o.alpha_bars_;
    }

private:
    void check_t(int t) const { check_arg(t >= 1 && t <= T_, "schedule: t out of range"); }

    int T_ = 0;
    SigmaMode mode_ = SigmaMode::DDPM;
    std::vector<double> alphas_;       // index 1..T, [0] unused
    std::vector<double> alpha_bars_;   // index 0..T
    std::vector<double> sigmas_ddpm_;  // index 1..T, [0] unused
};

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * noise.
// Noise is injected by the caller so every stochastic path is seedable.
template <typename T>
mat<T> forward_diffuse(const mat<T>& x0, int t, const mat<T>& noise,
                       const NoiseSchedule& sched) {
    check_arg(t >= 1 && t <= sched.steps(), "forward_diffuse: t out of range");
    check_shape(x0.same_shape(noise), "forward_diffuse: roll/noise shape mismatch");
    const T a = static_cast<T>(std::sqrt(sched.alpha_bar(t)));
    const T b = static_cast<T>(std::sqrt(1.0 - sched.alpha_bar(t)));
    mat<T> out(x0.rows, x0.cols);
    for (size_t i = 0; i < x0.size(); ++i) out.v[i] = a * x0.v[i] + b * noise.v[i];
    return out;
}

const char* to_string(SigmaMode m);
SigmaMode sigma_mode_from_string(const std::string& s);

}  // namespace diffroll
