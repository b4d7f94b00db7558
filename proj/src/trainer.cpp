#include "diffroll/trainer.hpp"

#include <algorithm>

#include "diffroll/pianoroll.hpp"

namespace diffroll {

const char* to_string(TrainScheme s) {
    switch (s) {
        case TrainScheme::Supervised: return "supervised";
        case TrainScheme::UnpairedPretrain: return "pretrain";
        case TrainScheme::MixedP0Plus1: return "p0-plus-1";
    }
    return "?";
}

TrainScheme train_scheme_from_string(const std::string& s) {
    if (s == "supervised") return TrainScheme::Supervised;
    if (s == "pretrain") return TrainScheme::UnpairedPretrain;
    if (s == "p0-plus-1") return TrainScheme::MixedP0Plus1;
    throw std::invalid_argument("unknown training scheme: " + s);
}

void TrainConfig::validate() const {
    check_arg(dropout_p >= 0.0 && dropout_p <= 1.0, "TrainConfig: p must lie in [0,1]");
    check_arg(batch_size > 0, "TrainConfig: batch_size must be positive");
    check_arg(lr > 0.0, "TrainConfig: lr must be positive");
    check_arg(steps >= 0, "TrainConfig: steps must be non-negative");
    check_arg(crop_frames >= 0, "TrainConfig: crop_frames must be non-negative");
    check_arg(mix_ratio >= 0.0 && mix_ratio <= 1.0, "TrainConfig: mix_ratio in [0,1]");
}

std::vector<uint8_t> cfg_dropout(batch3f& conditioners, double p, Rng& rng) {
    check_arg(p >= 0.0 && p <= 1.0, "cfg_dropout: p must lie in [0,1]");
    std::vector<uint8_t> masked(static_cast<size_t>(conditioners.b), 0);
    for (int bi = 0; bi < conditioners.b; ++bi) {
        const bool drop = rng.uniform() < p;
        masked[static_cast<size_t>(bi)] = drop ? 1 : 0;
        if (drop) {
            float* it = conditioners.item(bi);
            std::fill(it, it + static_cast<size_t>(conditioners.c) * conditioners.t,
                      -1.0f);
        }
    }
    return masked;
}

Trainer::Trainer(DiffRollNetF& model, NoiseSchedule schedule, TrainConfig cfg)
    : model_(model),
      schedule_(std::move(schedule)),
      cfg_(cfg),
      adam_(model.tensors(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps),
      rng_(cfg.seed) {
    cfg_.validate();
}

double Trainer::step_on_batch(const batch3f& rolls, const batch3f& mels, double p) {
    check_shape(rolls.b == mels.b && rolls.t == mels.t,
                "step_on_batch: roll/conditioner batches misaligned");
    const int b = rolls.b, tau = rolls.t;
    const int T = schedule_.steps();

    // RNG order per step: t draws, then noise, then dropout. Fixed so seeded
    // runs reproduce bit for bit.
    std::vector<int> t(static_cast<size_t>(b), 1);
    if (!cfg_.discriminative)
        for (int bi = 0; bi < b; ++bi)
            t[static_cast<size_t>(bi)] = static_cast<int>(rng_.uniform_int(1, T));

    batch3f x_t(b, rolls.c, tau, 0.0f);
    if (!cfg_.discriminative) {
        for (int bi = 0; bi < b; ++bi) {
            matf noise(rolls.c, tau);
            for (auto& v : noise.v) v = static_cast<float>(rng_.gaussian());
            const matf xt_item =
                forward_diffuse(rolls.get_item(bi), t[static_cast<size_t>(bi)], noise,
                                schedule_);
            x_t.set_item(bi, xt_item);
        }
    }

    batch3f dropped = mels;
    cfg_dropout(dropped, p, rng_);

    batch3f out;
    model_.forward(x_t, t, dropped, out, ws_, &cache_);
    const double loss = mse_loss(rolls, out);

    batch3f d_out(b, rolls.c, tau);
    const double scale = 2.0 / static_cast<double>(rolls.size());
    for (size_t i = 0; i < d_out.size(); ++i)
        d_out.v[i] = static_cast<float>(
            scale * (static_cast<double>(out.v[i]) - static_cast<double>(rolls.v[i])));

    model_.zero_grad();
    model_.backward(x_t, t, dropped, cache_, d_out, ws_);
    adam_.step();
    return loss;
}

Trainer::Batch Trainer::assemble(const std::vector<TrainSample>& ds) {
    check_arg(!ds.empty(), "trainer: dataset is empty");
    const int b = cfg_.batch_size;

    std::vector<const TrainSample*> picks(static_cast<size_t>(b));
    for (int bi = 0; bi < b; ++bi)
        picks[static_cast<size_t>(bi)] =
            &ds[static_cast<size_t>(rng_.uniform_int(0, static_cast<int64_t>(ds.size()) - 1))];

    int tau = picks[0]->roll.cols;
    if (cfg_.crop_frames > 0) tau = std::min(tau, cfg_.crop_frames);

    Batch batch;
    batch.rolls = batch3f(b, kNumPitches, tau);
    batch.mels = batch3f(b, model_.config().mel_bins, tau);

    for (int bi = 0; bi < b; ++bi) {
        const TrainSample& s = *picks[static_cast<size_t>(bi)];
        check_shape(s.roll.rows == kNumPitches, "trainer: roll must have 88 rows");
        check_shape(!s.paired() || s.mel.rows == batch.mels.c,
                    "trainer: conditioner bin count does not match the model");
        check_shape(!s.paired() || s.mel.cols == s.roll.cols,
                    "trainer: paired sample with misaligned frame counts");
        int off = 0;
        if (cfg_.crop_frames > 0) {
            check_arg(s.roll.cols >= tau, "trainer: sample shorter than crop");
            off = static_cast<int>(rng_.uniform_int(0, s.roll.cols - tau));
        } else {
            check_shape(s.roll.cols == tau, "trainer: uncropped samples must share tau");
        }
        for (int r = 0; r < kNumPitches; ++r)
            std::copy(s.roll.row(r) + off, s.roll.row(r) + off + tau,
                      batch.rolls.chan(bi, r));
        if (s.paired()) {
            for (int m = 0; m < s.mel.rows; ++m)
                std::copy(s.mel.row(m) + off, s.mel.row(m) + off + tau,
                          batch.mels.chan(bi, m));
        } else {
            float* it = batch.mels.item(bi);
            std::fill(it, it + static_cast<size_t>(batch.mels.c) * tau, -1.0f);
        }
    }
    return batch;
}

void Trainer::run(const std::vector<TrainSample>& paired,
                  const std::vector<TrainSample>& unpaired,
                  const std::function<void(const LossRecord&)>& on_step) {
    if (cfg_.scheme == TrainScheme::Supervised)
        check_arg(!paired.empty(), "supervised training needs a paired dataset");
    if (cfg_.scheme == TrainScheme::UnpairedPretrain)
        check_arg(!unpaired.empty(), "pretraining needs an unpaired dataset");
    if (cfg_.scheme == TrainScheme::MixedP0Plus1)
        check_arg(!paired.empty() && !unpaired.empty(),
                  "p0-plus-1 training needs both datasets");

    for (int s = 0; s < cfg_.steps; ++s) {
        if (cfg_.lr_final >= 0.0 && cfg_.steps > 1) {
            const double phase = 3.14159265358979323846 * s / (cfg_.steps - 1);
            adam_.set_lr(cfg_.lr_final +
                         0.5 * (cfg_.lr - cfg_.lr_final) * (1.0 + std::cos(phase)));
        }
        double p = cfg_.dropout_p;
        bool paired_source = true;
        const std::vector<TrainSample>* src = &paired;

        switch (cfg_.scheme) {
            case TrainScheme::Supervised:
                break;
            case TrainScheme::UnpairedPretrain:
                src = &unpaired;
                paired_source = false;
                p = 1.0;  // conditioner forced to -1: unconditional-only updates
                break;
            case TrainScheme::MixedP0Plus1:
                paired_source = rng_.uniform() < cfg_.mix_ratio;
                if (paired_source) {
                    p = 0.0;  // paired batches are never masked
                } else {
                    src = &unpaired;
                    p = 1.0;
                }
                break;
        }

        const Batch batch = assemble(*src);
        const double loss = step_on_batch(batch.rolls, batch.mels, p);

        if (on_step) {
            LossRecord rec;
            rec.step = adam_.step_count();
            rec.loss = loss;
            rec.p = p;
            rec.scheme = cfg_.scheme;
            rec.paired_source = paired_source;
            on_step(rec);
        }
    }
}

}  // namespace diffroll
