#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "diffroll/features.hpp"
#include "diffroll/mat.hpp"
#include "diffroll/pianoroll.hpp"
#include "diffroll/schedule.hpp"

namespace diffroll {

// (1 + w) * cond - w * uncond, elementwise. w = 0 returns cond, w = -1 returns
// uncond exactly.
template <typename T>
mat<T> cfg_combine(const mat<T>& x0_cond, const mat<T>& x0_uncond, double w) {
    check_shape(x0_cond.same_shape(x0_uncond), "cfg_combine: shape mismatch");
    const T a = static_cast<T>(1.0 + w);
    const T b = static_cast<T>(w);
    mat<T> out(x0_cond.rows, x0_cond.cols);
    for (size_t i = 0; i < out.size(); ++i)
        out.v[i] = a * x0_cond.v[i] - b * x0_uncond.v[i];
    return out;
}

// eps_hat = (x_t - sqrt(alpha_bar_t) * x0_hat) / sqrt(1 - alpha_bar_t).
// Inverse of the forward process; undefined at t = 0 where alpha_bar = 1.
template <typename T>
mat<T> epsilon_from_x0(const mat<T>& x_t, const mat<T>& x0_hat, int t,
                       const NoiseSchedule& sched) {
    check_arg(t >= 1 && t <= sched.steps(), "epsilon_from_x0: t out of range");
    check_shape(x_t.same_shape(x0_hat), "epsilon_from_x0: shape mismatch");
    const double ab = sched.alpha_bar(t);
    const T a = static_cast<T>(std::sqrt(ab));
    const T inv = static_cast<T>(1.0 / std::sqrt(1.0 - ab));
    mat<T> out(x_t.rows, x_t.cols);
    for (size_t i = 0; i < out.size(); ++i)
        out.v[i] = (x_t.v[i] - a * x0_hat.v[i]) * inv;
    return out;
}

// One reverse step:
//   x_{t-1} = sqrt(ab_{t-1}) * x0_hat + sqrt(1 - ab_{t-1} - sigma_t^2) * eps_hat
//             + sigma_t * noise
// with eps_hat derived from x0_hat. At t = 1 this collapses to x0_hat exactly.
template <typename T>
mat<T> reverse_step(const mat<T>& x_t, const mat<T>& x0_hat, int t, const mat<T>& noise,
                    const NoiseSchedule& sched, SigmaMode mode) {
    check_arg(t >= 1 && t <= sched.steps(), "reverse_step: t out of range");
    check_shape(x_t.same_shape(x0_hat) && x_t.same_shape(noise),
                "reverse_step: shape mismatch");
    const double ab_prev = sched.alpha_bar(t - 1);
    const double sigma = mode == SigmaMode::DDIM ? 0.0 : sched.sigma_ddpm(t);
    double dir_sq = 1.0 - ab_prev - sigma * sigma;
    if (dir_sq < 0.0) {
        if (dir_sq < -1e-12)
            throw numerical_error("reverse_step: 1 - alpha_bar_{t-1} - sigma^2 < 0");
        dir_sq = 0.0;
    }
    const mat<T> eps = epsilon_from_x0(x_t, x0_hat, t, sched);
    const T a = static_cast<T>(std::sqrt(ab_prev));
    const T b = static_cast<T>(std::sqrt(dir_sq));
    const T s = static_cast<T>(sigma);
    mat<T> out(x_t.rows, x_t.cols);
    for (size_t i = 0; i < out.size(); ++i)
        out.v[i] = a * x0_hat.v[i] + b * eps.v[i] + s * noise.v[i];
    return out;
}

struct SamplerConfig {
    double w = 0.5;                      // CFG weight
    SigmaMode sigma_mode = SigmaMode::DDPM;
    uint64_t seed = 0;
    double threshold = 0.5;              // binarization threshold
    int snapshot_every = 0;              // 0 disables trajectory recording
    bool discriminative = false;         // single forward pass at x_t = 0, t = 1

    void validate() const {
        check_arg(threshold > 0.0 && threshold < 1.0,
                  "SamplerConfig: threshold must lie in (0,1)");
        check_arg(snapshot_every >= 0, "SamplerConfig: snapshot_every must be >= 0");
    }
};

struct SampleResult {
    matf raw;         // unbounded posteriorgram x0
    PianoRoll roll;   // binarized at the configured threshold
    std::vector<std::pair<int, matf>> trajectory;  // (t, x_t) snapshots
};

// Denoiser callback: out = f(x_t, t, c_mel) for a whole batch. The model
// adapter and the test oracles both implement this signature. Transcription
// receives only audio-derived conditioners; ground truth never enters here.
using DenoiserFn = std::function<void(const batch3f& x_t, const std::vector<int>& t,
                                      const batch3f& c_mel, batch3f& out)>;

class Sampler {
public:
    Sampler(DenoiserFn denoiser, NoiseSchedule schedule, double frame_rate)
        : denoiser_(std::move(denoiser)),
          schedule_(std::move(schedule)),
          frame_rate_(frame_rate) {}

    // Runs the full reverse loop for each conditioner; per-sample RNG streams
    // are forked from (seed, sample index) so batching never changes results.
    std::vector<SampleResult> sample(const std::vector<MelConditioner>& conditioners,
                                     const SamplerConfig& cfg) const;

    // Masks the selected frames to -1 first, then samples: masked regions are
    // generated, unmasked regions transcribed.
    std::vector<SampleResult> inpaint(const std::vector<MelConditioner>& conditioners,
                                      const std::vector<uint8_t>& frame_mask,
                                      const SamplerConfig& cfg) const;

private:
    DenoiserFn denoiser_;
    NoiseSchedule schedule_;
    double frame_rate_;
};

}  // namespace diffroll
