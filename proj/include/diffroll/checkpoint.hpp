#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "diffroll/features.hpp"
#include "diffroll/model.hpp"
#include "diffroll/rng.hpp"
#include "diffroll/schedule.hpp"
#include "diffroll/trainer.hpp"

namespace diffroll {

// Everything a checkpoint carries besides the weights, so a transcription run
// can be reproduced exactly from the file alone.
struct Provenance {
    std::string created_by;  // command line or tool tag
    uint64_t seed = 0;
    double dropout_p = 0.0;
    std::string scheme = "supervised";
    int64_t steps = 0;
    bool discriminative = false;
};

// Optional optimizer/RNG state for bit-reproducible resume.
struct TrainState {
    std::vector<std::vector<float>> adam_m;
    std::vector<std::vector<float>> adam_v;
    int64_t adam_steps = 0;
    std::array<uint64_t, 6> rng_state{};
};

struct Checkpoint {
    DenoiserConfig model_config;
    int schedule_steps = 200;
    FeatureConfig features;
    Provenance provenance;
    std::vector<std::pair<std::string, std::vector<float>>> tensors;
    std::optional<TrainState> train_state;
};

void save_checkpoint(const std::string& path, const DiffRollNetF& model,
                     const NoiseSchedule& schedule, const FeatureConfig& features,
                     const Provenance& prov, const TrainState* train_state = nullptr);

Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model from a loaded checkpoint (weights included).
DiffRollNetF restore_model(const Checkpoint& ckpt);

// FNV-1a over the file bytes, for provenance records.
uint64_t checkpoint_file_hash(const std::string& path);

}  // namespace diffroll
