#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitlab/acquisition.hpp"
#include "vitlab/dataset.hpp"
#include "vitlab/metrics.hpp"
#include "vitlab/noise.hpp"
#include "vitlab/vit.hpp"

namespace vitlab {

struct DalConfig {
    ViTConfig model;
    Strategy strategy = Strategy::Random;
    double noise_rate = 0.0;
    int64_t seed_size = 256;
    int64_t round_budget = 512;
    int rounds = 8;
    uint64_t master_seed = 1;
    TrainConfig train;      // desk default batch 64 set by the grid runner
    GciConfig gci;
    bool reinit_each_round = false;  // default: keep fine-tuning round over round
    bool save_round_checkpoints = false;
    std::string checkpoint_dir;

    void validate(int64_t train_size) const;
};

// Inspection data for integration tests: the final pool partition, the exact
// training examples used in the last round and which indices were flipped.
struct DalAudit {
    Pool final_pool;
    std::vector<TrainExample> final_training_set;
    std::vector<int64_t> flipped_indices;
    std::vector<std::vector<int64_t>> acquired_per_round;  // rounds entries of size round_budget
};

// Runs the full cycle: round 0 trains on a clean random seed set; each later
// round scores the unlabeled pool with the current model, acquires
// round_budget samples, corrupts the newly acquired labels (seed and test
// labels are never touched), fine-tunes and evaluates on the clean test set.
// Deterministic per master seed, timing fields aside.
std::vector<RoundRecord> run_dal(const ImageDataset& train, const ImageDataset& test, const DalConfig& cfg,
                                 DalAudit* audit = nullptr, ViTModel* model_out = nullptr);

}  // namespace vitlab
