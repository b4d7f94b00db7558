#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "diffroll/mat.hpp"
#include "diffroll/model.hpp"
#include "diffroll/rng.hpp"
#include "diffroll/schedule.hpp"

namespace diffroll {

enum class TrainScheme { Supervised, UnpairedPretrain, MixedP0Plus1 };

const char* to_string(TrainScheme s);
TrainScheme train_scheme_from_string(const std::string& s);

struct TrainConfig {
    TrainScheme scheme = TrainScheme::Supervised;
    double dropout_p = 0.1;
    int batch_size = 16;
    double lr = 5e-4;
    double lr_final = -1.0;  // >= 0 enables cosine decay from lr over the run
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int steps = 1000;
    uint64_t seed = 0;
    int crop_frames = 0;     // 0 trains on full segments
    double mix_ratio = 0.5;  // probability of drawing a paired batch (p=0+1 scheme)
    bool discriminative = false;  // x_t = 0, t = 1 baseline through the same loop

    void validate() const;
};

// One training example. Pairs carry a conditioner; unpaired rolls do not and
// train only the unconditional mode.
struct TrainSample {
    matf roll;  // 88 x tau, binary
    matf mel;   // 229 x tau when paired, empty otherwise
    bool paired() const { return mel.size() != 0; }
};

// Replaces each batch item with the all-(-1) conditioner independently with
// probability p. Exactly one uniform draw is consumed per item regardless of p,
// so p = 0 / p = 1 stay on the same RNG schedule. Returns the mask decisions.
std::vector<uint8_t> cfg_dropout(batch3f& conditioners, double p, Rng& rng);

// Mean squared error over every entry (Eq. 3 with mean reduction).
template <typename T>
double mse_loss(const batch3<T>& target, const batch3<T>& pred) {
    check_shape(target.b == pred.b && target.c == pred.c && target.t == pred.t,
                "mse_loss: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        const double d = static_cast<double>(target.v[i]) - static_cast<double>(pred.v[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(target.size());
}

template <typename T>
class Adam {
public:
    Adam(std::vector<Tensor<T>*>& params, double lr, double beta1, double beta2,
         double eps)
        : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (Tensor<T>* t : params) {
            m_.emplace_back(t->size(), T(0));
            v_.emplace_back(t->size(), T(0));
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t pi = 0; pi < params_->size(); ++pi) {
            Tensor<T>& p = *(*params_)[pi];
            std::vector<T>& m = m_[pi];
            std::vector<T>& v = v_[pi];
            for (size_t i = 0; i < p.size(); ++i) {
                const double g = static_cast<double>(p.g[i]);
                const double mi = beta1_ * m[i] + (1.0 - beta1_) * g;
                const double vi = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                p.w[i] -= static_cast<T>(lr_ * (mi / bc1) /
                                         (std::sqrt(vi / bc2) + eps_));
            }
        }
    }

    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    std::vector<std::vector<T>>& moments1() { return m_; }
    std::vector<std::vector<T>>& moments2() { return v_; }
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    std::vector<Tensor<T>*>* params_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
};

struct LossRecord {
    int64_t step = 0;
    double loss = 0.0;
    double p = 0.0;
    TrainScheme scheme = TrainScheme::Supervised;
    bool paired_source = true;
};

class Trainer {
public:
    Trainer(DiffRollNetF& model, NoiseSchedule schedule, TrainConfig cfg);

    // One optimizer step on an assembled batch. `mels` must have one item per
    // roll; unpaired batches pass the -1 fill. Applies CFG dropout with
    // probability p, builds x_t per Eq. (1), and minimizes Eq. (3).
    double step_on_batch(const batch3f& rolls, const batch3f& mels, double p);

    // Draws `cfg.steps` batches from the datasets according to the scheme.
    // `paired` may be empty only for the pretraining scheme, `unpaired` only
    // matters for pretraining / mixed. Emits one record per step.
    void run(const std::vector<TrainSample>& paired,
             const std::vector<TrainSample>& unpaired,
             const std::function<void(const LossRecord&)>& on_step = nullptr);

    Adam<float>& optimizer() { return adam_; }
    Rng& rng() { return rng_; }
    int64_t steps_done() const { return adam_.step_count(); }
    const TrainConfig& config() const { return cfg_; }
    const NoiseSchedule& schedule() const { return schedule_; }

private:
    struct Batch {
        batch3f rolls;
        batch3f mels;
    };
    Batch assemble(const std::vector<TrainSample>& ds);

    DiffRollNetF& model_;
    NoiseSchedule schedule_;
    TrainConfig cfg_;
    Adam<float> adam_;
    Rng rng_;
    Workspace<float> ws_;
    ForwardCache<float> cache_;
};

}  // namespace diffroll
