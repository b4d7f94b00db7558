#include "diffroll/sampler.hpp"

#include "diffroll/rng.hpp"

namespace diffroll {

namespace {

matf draw_gaussian(Rng& rng, int rows, int cols) {
    matf m(rows, cols);
    for (auto& v : m.v) v = static_cast<float>(rng.gaussian());
    return m;
}

}  // namespace

std::vector<SampleResult> Sampler::sample(const std::vector<MelConditioner>& conditioners,
                                          const SamplerConfig& cfg) const {
    cfg.validate();
    check_arg(!conditioners.empty(), "sample: no conditioners given");
    const int bins = conditioners[0].bins();
    const int tau = conditioners[0].frames();
    for (const auto& c : conditioners)
        check_shape(c.bins() == bins && c.frames() == tau,
                    "sample: conditioners in one batch must share shape");
    const int b = static_cast<int>(conditioners.size());
    const int T = schedule_.steps();

    std::vector<SampleResult> results(static_cast<size_t>(b));

    if (cfg.discriminative) {
        // The discriminative baseline predicts the posteriorgram in one pass
        // from a zero tensor at t = 1; everything downstream is shared.
        batch3f x(b, kNumPitches, tau, 0.0f);
        batch3f c(b, bins, tau);
        for (int bi = 0; bi < b; ++bi) c.set_item(bi, conditioners[static_cast<size_t>(bi)].data);
        batch3f out;
        denoiser_(x, std::vector<int>(static_cast<size_t>(b), 1), c, out);
        for (int bi = 0; bi < b; ++bi) {
            results[static_cast<size_t>(bi)].raw = out.get_item(bi);
            results[static_cast<size_t>(bi)].roll =
                binarize(results[static_cast<size_t>(bi)].raw, frame_rate_, cfg.threshold);
        }
        return results;
    }

    // Per-sample streams keyed by (seed, index): batched and single-item runs
    // produce identical bytes.
    Rng root(cfg.seed);
    std::vector<Rng> streams;
    streams.reserve(static_cast<size_t>(b));
    for (int bi = 0; bi < b; ++bi) streams.push_back(root.fork(static_cast<uint64_t>(bi)));

    std::vector<matf> x(static_cast<size_t>(b));
    for (int bi = 0; bi < b; ++bi) {
        x[static_cast<size_t>(bi)] = draw_gaussian(streams[static_cast<size_t>(bi)],
                                                   kNumPitches, tau);
        if (cfg.snapshot_every > 0)
            results[static_cast<size_t>(bi)].trajectory.emplace_back(
                T, x[static_cast<size_t>(bi)]);
    }

    // Conditional and unconditional branches ride in one doubled batch; the
    // per-item forward makes this numerically identical to two separate calls.
    batch3f xt2(2 * b, kNumPitches, tau);
    batch3f c2(2 * b, bins, tau);
    const MelConditioner blank = blank_conditioner(bins, tau);
    for (int bi = 0; bi < b; ++bi) {
        c2.set_item(bi, conditioners[static_cast<size_t>(bi)].data);
        c2.set_item(b + bi, blank.data);
    }
    batch3f out;

    for (int t = T; t >= 1; --t) {
        std::vector<matf> noise(static_cast<size_t>(b));
        for (int bi = 0; bi < b; ++bi) {
            noise[static_cast<size_t>(bi)] =
                t > 1 ? draw_gaussian(streams[static_cast<size_t>(bi)], kNumPitches, tau)
                      : matf(kNumPitches, tau, 0.0f);
        }

        for (int bi = 0; bi < b; ++bi) {
            xt2.set_item(bi, x[static_cast<size_t>(bi)]);
            xt2.set_item(b + bi, x[static_cast<size_t>(bi)]);
        }
        denoiser_(xt2, std::vector<int>(static_cast<size_t>(2 * b), t), c2, out);

        for (int bi = 0; bi < b; ++bi) {
            const matf x0_hat =
                cfg_combine(out.get_item(bi), out.get_item(b + bi), cfg.w);
            x[static_cast<size_t>(bi)] =
                reverse_step(x[static_cast<size_t>(bi)], x0_hat, t,
                             noise[static_cast<size_t>(bi)], schedule_, cfg.sigma_mode);
            if (cfg.snapshot_every > 0 && (t - 1) % cfg.snapshot_every == 0)
                results[static_cast<size_t>(bi)].trajectory.emplace_back(
                    t - 1, x[static_cast<size_t>(bi)]);
        }
    }

    for (int bi = 0; bi < b; ++bi) {
        results[static_cast<size_t>(bi)].raw = x[static_cast<size_t>(bi)];
        results[static_cast<size_t>(bi)].roll =
            binarize(x[static_cast<size_t>(bi)], frame_rate_, cfg.threshold);
    }
    return results;
}

std::vector<SampleResult> Sampler::inpaint(const std::vector<MelConditioner>& conditioners,
                                           const std::vector<uint8_t>& frame_mask,
                                           const SamplerConfig& cfg) const {
    std::vector<MelConditioner> masked;
    masked.reserve(conditioners.size());
    for (const auto& c : conditioners) masked.push_back(apply_mask(c, frame_mask));
    return sample(masked, cfg);
}

}  // namespace diffroll
