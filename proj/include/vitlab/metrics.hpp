#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vitlab/tensor.hpp"

namespace vitlab {

// Fraction of predictions matching the ground truth.
double top1_accuracy(std::span<const int> predicted, std::span<const int> truth);

// Mean over samples of the squared distance between the predicted
// distribution and the one-hot label; range [0, 2].
double brier_score(const Tensor& probs, std::span<const int> truth);

// One DAL round's outcome.
struct RoundRecord {
    int round = 0;
    double labeled_fraction = 0.0;
    double top1 = 0.0;
    double brier = 0.0;
    double seconds = 0.0;
    int epochs = 0;
    std::string strategy;
    double noise_rate = 0.0;
    std::string model_id;
    uint64_t seed = 0;
    std::string run_id;
};

struct GridCell {
    std::string model_id;       // "*" when marginalized out
    double noise_rate = 0.0;    // -1 when marginalized out
    std::string strategy;       // "*" when marginalized out
    double labeled_fraction = 0.0;  // -1 when marginalized out
    double mean_top1 = 0.0;
    double mean_brier = 0.0;
    double mean_seconds = 0.0;
    int64_t run_count = 0;
};

struct GridKeyOptions {
    bool by_model = true;
    bool by_noise = true;
    bool by_strategy = true;
    bool by_proportion = true;
};

// Unweighted means over records sharing the enabled keys; disabled keys are
// marginalized out. Output is sorted by (model, noise, strategy, proportion).
std::vector<GridCell> aggregate_grid(std::span<const RoundRecord> records, const GridKeyOptions& keys = {});

// Cell lookup; throws CoverageError when no cell matches.
const GridCell& find_cell(std::span<const GridCell> cells, const std::string& model_id, double noise_rate,
                          const std::string& strategy, double labeled_fraction);

// Per-strategy deltas against the random baseline with the same remaining
// keys. Accuracy delta = strategy - random (positive = more accurate);
// Brier delta = random - strategy (positive = better calibrated).
struct DeltaCell {
    std::string model_id;
    double noise_rate = 0.0;
    std::string strategy;
    double labeled_fraction = 0.0;
    double accuracy_delta = 0.0;
    double brier_delta = 0.0;
};

std::vector<DeltaCell> delta_vs_random(std::span<const GridCell> cells);

}  // namespace vitlab
