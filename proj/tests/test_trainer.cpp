#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include "diffroll/dataset.hpp"
#include "diffroll/pianoroll.hpp"
#include "diffroll/sampler.hpp"
#include "diffroll/trainer.hpp"

using namespace diffroll;

namespace {

DenoiserConfig tiny_config(int max_t = 20) {
    DenoiserConfig cfg;
    cfg.residual_channels = 12;
    cfg.num_layers = 2;
    cfg.kernel_size = 3;
    cfg.time_embed_dim = 16;
    cfg.max_timestep = max_t;
    return cfg;
}

std::vector<TrainSample> toy_pairs(uint64_t seed, int n, int tau, bool paired = true) {
    Rng rng(seed);
    std::vector<TrainSample> out;
    for (int i = 0; i < n; ++i) {
        TrainSample s;
        s.roll = matf(kNumPitches, tau, 0.0f);
        for (auto& v : s.roll.v) v = rng.uniform() < 0.1 ? 1.0f : 0.0f;
        if (paired) {
            s.mel = matf(229, tau);
            for (auto& v : s.mel.v) v = static_cast<float>(rng.uniform(0.0, 1.0));
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("cfg_dropout: p=0 never masks, p=1 always masks") {
    Rng rng(1);
    batch3f c(8, 229, 4, 0.25f);
    const auto none = cfg_dropout(c, 0.0, rng);
    for (const auto m : none) CHECK(m == 0);
    for (const float v : c.v) CHECK(v == 0.25f);

    const auto all = cfg_dropout(c, 1.0, rng);
    for (const auto m : all) CHECK(m == 1);
    for (const float v : c.v) CHECK(v == -1.0f);

    CHECK_THROWS_AS(cfg_dropout(c, 1.5, rng), std::invalid_argument);
}

TEST_CASE("cfg_dropout frequency lies in the 99% binomial interval") {
    for (const double p : {0.1, 0.5}) {
        Rng rng(42);
        int masked = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            batch3f c(1, 4, 2, 0.5f);
            masked += cfg_dropout(c, p, rng)[0];
        }
        const double phat = static_cast<double>(masked) / n;
        const double half_width = 2.5758 * std::sqrt(p * (1.0 - p) / n);
        CHECK(phat > p - half_width);
        CHECK(phat < p + half_width);
    }
}

TEST_CASE("mse loss: zero for perfect prediction, 0.01 for +0.1 offset") {
    batch3f target(2, 88, 16);
    Rng rng(2);
    for (auto& v : target.v) v = rng.uniform() < 0.2 ? 1.0f : 0.0f;

    batch3f perfect = target;
    CHECK(mse_loss(target, perfect) == 0.0);

    batch3f off = target;
    for (auto& v : off.v) v += 0.1f;
    CHECK(mse_loss(target, off) == doctest::Approx(0.01).epsilon(1e-5));

    batch3f bad(2, 88, 17);
    CHECK_THROWS_AS(mse_loss(target, bad), shape_error);
}

TEST_CASE("loss is nonnegative and zero only for exact prediction") {
    Rng rng(3);
    batch3f target(1, 8, 8);
    for (auto& v : target.v) v = static_cast<float>(rng.gaussian());
    batch3f pred = target;
    pred.v[17] += 1e-3f;
    CHECK(mse_loss(target, pred) > 0.0);
    CHECK(mse_loss(target, target) == 0.0);
}

TEST_CASE("training reduces the loss on a fixed toy set") {
    DiffRollNetF model(tiny_config(), 11);
    TrainConfig cfg;
    cfg.steps = 500;
    cfg.batch_size = 2;
    cfg.lr = 2e-3;
    cfg.dropout_p = 0.1;
    cfg.seed = 5;
    Trainer trainer(model, NoiseSchedule::linear(20), cfg);
    const auto data = toy_pairs(1, 2, 24);

    std::vector<double> losses;
    trainer.run(data, {}, [&](const LossRecord& rec) { losses.push_back(rec.loss); });
    REQUIRE(losses.size() == 500);

    double early = 0.0, late = 0.0;
    for (int i = 0; i < 10; ++i) early += losses[static_cast<size_t>(i)];
    for (int i = 490; i < 500; ++i) late += losses[static_cast<size_t>(i)];
    CHECK(late < early);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    const auto data = toy_pairs(7, 3, 16);
    auto run = [&](uint64_t seed) {
        DiffRollNetF model(tiny_config(), 4);
        TrainConfig cfg;
        cfg.steps = 25;
        cfg.batch_size = 2;
        cfg.seed = seed;
        Trainer trainer(model, NoiseSchedule::linear(20), cfg);
        std::vector<double> losses;
        trainer.run(data, {}, [&](const LossRecord& rec) { losses.push_back(rec.loss); });
        return std::make_pair(losses, model.tensor("head.conv2.w")->w);
    };
    const auto a = run(9);
    const auto b = run(9);
    const auto c = run(10);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(a.first != c.first);
}

TEST_CASE("uniform t coverage over many steps") {
    // count the t draws a supervised run makes through the same RNG path
    const int T = 20;
    Rng rng(123);
    std::vector<int> counts(static_cast<size_t>(T) + 1, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        counts[static_cast<size_t>(rng.uniform_int(1, T))]++;
    const double expect = static_cast<double>(n) / T;
    const double sd = std::sqrt(expect * (1.0 - 1.0 / T));
    for (int t = 1; t <= T; ++t)
        CHECK(std::fabs(counts[static_cast<size_t>(t)] - expect) < 4.5 * sd);
}

TEST_CASE("pretraining equals supervised training at p=1, bit for bit") {
    const int tau = 16;
    const auto paired = toy_pairs(21, 2, tau, true);
    std::vector<TrainSample> unpaired;
    for (const auto& s : paired) {
        TrainSample u;
        u.roll = s.roll;  // same rolls, no conditioner
        unpaired.push_back(std::move(u));
    }

    auto final_weights = [&](TrainScheme scheme, double p,
                             const std::vector<TrainSample>& pairs,
                             const std::vector<TrainSample>& rolls) {
        DiffRollNetF model(tiny_config(), 31);
        TrainConfig cfg;
        cfg.scheme = scheme;
        cfg.dropout_p = p;
        cfg.steps = 8;
        cfg.batch_size = 2;
        cfg.seed = 77;
        Trainer trainer(model, NoiseSchedule::linear(20), cfg);
        trainer.run(pairs, rolls, nullptr);
        return model.tensor("layers.0.dil_conv.w")->w;
    };

    const auto supervised_p1 =
        final_weights(TrainScheme::Supervised, 1.0, paired, {});
    const auto pretrained =
        final_weights(TrainScheme::UnpairedPretrain, 0.1, {}, unpaired);
    CHECK(supervised_p1 == pretrained);
}

TEST_CASE("mixed p0+1 scheme: paired batches never masked, ratio near target") {
    DiffRollNetF model(tiny_config(), 41);
    TrainConfig cfg;
    cfg.scheme = TrainScheme::MixedP0Plus1;
    cfg.steps = 400;
    cfg.batch_size = 1;
    cfg.mix_ratio = 0.5;
    cfg.seed = 13;
    Trainer trainer(model, NoiseSchedule::linear(20), cfg);

    const auto paired = toy_pairs(1, 2, 12, true);
    const auto unpaired = toy_pairs(2, 2, 12, false);

    int paired_steps = 0;
    trainer.run(paired, unpaired, [&](const LossRecord& rec) {
        if (rec.paired_source) {
            CHECK(rec.p == 0.0);
            ++paired_steps;
        } else {
            CHECK(rec.p == 1.0);
        }
    });
    // 99% binomial interval around 200 of 400
    CHECK(paired_steps > 200 - 26);
    CHECK(paired_steps < 200 + 26);
}

TEST_CASE("mixed scheme requires both datasets; supervised requires paired") {
    DiffRollNetF model(tiny_config(), 51);
    TrainConfig cfg;
    cfg.scheme = TrainScheme::MixedP0Plus1;
    cfg.steps = 1;
    cfg.batch_size = 1;
    Trainer trainer(model, NoiseSchedule::linear(20), cfg);
    const auto paired = toy_pairs(1, 1, 8, true);
    CHECK_THROWS_AS(trainer.run(paired, {}, nullptr), std::invalid_argument);

    TrainConfig sup;
    sup.scheme = TrainScheme::Supervised;
    sup.steps = 1;
    Trainer t2(model, NoiseSchedule::linear(20), sup);
    CHECK_THROWS_AS(t2.run({}, {}, nullptr), std::invalid_argument);

    TrainConfig pre;
    pre.scheme = TrainScheme::UnpairedPretrain;
    pre.steps = 1;
    Trainer t3(model, NoiseSchedule::linear(20), pre);
    CHECK_THROWS_AS(t3.run({}, {}, nullptr), std::invalid_argument);
}

TEST_CASE("discriminative flag trains through the same step with x_t=0, t=1") {
    DiffRollNetF model(tiny_config(), 61);
    TrainConfig cfg;
    cfg.discriminative = true;
    cfg.steps = 120;
    cfg.batch_size = 2;
    cfg.lr = 2e-3;
    cfg.dropout_p = 0.0;
    cfg.seed = 3;
    Trainer trainer(model, NoiseSchedule::linear(20), cfg);
    const auto data = toy_pairs(5, 2, 16);
    std::vector<double> losses;
    trainer.run(data, {}, [&](const LossRecord& rec) { losses.push_back(rec.loss); });
    // the regression target is deterministic, so the loss falls fast
    CHECK(losses.back() < losses.front());
}

TEST_CASE("crop training draws aligned windows") {
    DiffRollNetF model(tiny_config(), 71);
    TrainConfig cfg;
    cfg.steps = 10;
    cfg.batch_size = 3;
    cfg.crop_frames = 8;
    cfg.seed = 4;
    Trainer trainer(model, NoiseSchedule::linear(20), cfg);
    const auto data = toy_pairs(9, 2, 64);
    CHECK_NOTHROW(trainer.run(data, {}, nullptr));

    // crop longer than the sample falls back to the full segment
    TrainConfig big = cfg;
    big.crop_frames = 128;
    Trainer t2(model, NoiseSchedule::linear(20), big);
    CHECK_NOTHROW(t2.run(data, {}, nullptr));

    // but a shorter sample mixed into the dataset is a hard error
    auto mixed = data;
    mixed.push_back(toy_pairs(10, 1, 4)[0]);
    Trainer t3(model, NoiseSchedule::linear(20), cfg);
    CHECK_THROWS_AS(t3.run(mixed, {}, nullptr), std::invalid_argument);
}

namespace {

// Small real toy fixture shared by the pretraining-behavior tests.
struct ToyFixture {
    std::vector<TrainSample> paired;
    std::vector<TrainSample> rolls_only;

    ToyFixture() {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / "diffroll_trainer_toy";
        if (!fs::exists(dir / "manifest.json")) make_toy_dataset(2, 21, dir.string());
        const DatasetManifest m = load_manifest((dir / "manifest.json").string());
        MelExtractor ex;
        paired = load_samples(m.entries, ex);
        for (const auto& s : paired) {
            TrainSample u;
            u.roll = s.roll;
            rolls_only.push_back(std::move(u));
        }
    }
};

DenoiserConfig toy_net_config() {
    DenoiserConfig cfg;
    cfg.residual_channels = 48;
    cfg.num_layers = 4;
    cfg.kernel_size = 9;
    cfg.time_embed_dim = 64;
    cfg.max_timestep = 200;
    return cfg;
}

TrainConfig toy_train_config(TrainScheme scheme, int steps) {
    TrainConfig tc;
    tc.scheme = scheme;
    tc.dropout_p = 0.1;
    tc.batch_size = 4;
    tc.crop_frames = 96;
    tc.lr = 2e-3;
    tc.steps = steps;
    tc.seed = 9;
    return tc;
}

// First step at which a trailing-10 average of the paired training loss drops
// below the threshold; steps+1 when it never does.
int steps_to_fit(DiffRollNetF& model, const std::vector<TrainSample>& paired,
                 double threshold, int steps) {
    Trainer trainer(model, NoiseSchedule::linear(200),
                    toy_train_config(TrainScheme::Supervised, steps));
    std::vector<double> window;
    int reached = steps + 1;
    trainer.run(paired, {}, [&](const LossRecord& rec) {
        window.push_back(rec.loss);
        if (window.size() > 10) window.erase(window.begin());
        if (window.size() == 10 && reached > steps) {
            double avg = 0;
            for (const double l : window) avg += l;
            if (avg / 10 < threshold) reached = static_cast<int>(rec.step);
        }
    });
    return reached;
}

}  // namespace

TEST_CASE("pretraining on unpaired rolls accelerates paired fine-tuning") {
    ToyFixture fx;

    // scratch
    DiffRollNetF scratch(toy_net_config(), 31);
    const int scratch_steps = steps_to_fit(scratch, fx.paired, 2.5e-3, 220);

    // pretrain on rolls only, then the same fine-tune
    DiffRollNetF pretrained(toy_net_config(), 31);
    Trainer pre(pretrained, NoiseSchedule::linear(200),
                toy_train_config(TrainScheme::UnpairedPretrain, 150));
    pre.run({}, fx.rolls_only, nullptr);
    const int pre_steps = steps_to_fit(pretrained, fx.paired, 2.5e-3, 220);

    INFO("scratch ", scratch_steps, " steps, pretrained ", pre_steps, " steps");
    CHECK(pre_steps <= scratch_steps);
}

TEST_CASE("after pretraining, unconditional generation produces notes") {
    ToyFixture fx;
    DiffRollNetF model(toy_net_config(), 33);
    Trainer pre(model, NoiseSchedule::linear(200),
                toy_train_config(TrainScheme::UnpairedPretrain, 400));
    pre.run({}, fx.rolls_only, nullptr);

    auto ws = std::make_shared<Workspace<float>>();
    DenoiserFn fn = [&model, ws](const batch3f& x, const std::vector<int>& t,
                                 const batch3f& c, batch3f& out) {
        out = model.predict_x0(x, t, c, *ws);
    };
    Sampler sampler(fn, NoiseSchedule::linear(200), 31.25);
    SamplerConfig cfg;
    cfg.w = -1.0;  // generation: the conditional term cancels
    cfg.seed = 3;
    const auto res = sampler.sample({blank_conditioner(229, 256)}, cfg);
    CHECK(!roll_to_notes(res[0].roll).empty());
}

TEST_CASE("misaligned paired batches are rejected") {
    DiffRollNetF model(tiny_config(), 81);
    TrainConfig cfg;
    Trainer trainer(model, NoiseSchedule::linear(20), cfg);
    batch3f rolls(2, 88, 16);
    batch3f mels(2, 229, 15);
    CHECK_THROWS_AS(trainer.step_on_batch(rolls, mels, 0.1), shape_error);
}
