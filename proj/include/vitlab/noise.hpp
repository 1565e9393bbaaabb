#pragma once

#include <cstdint>
#include <vector>

namespace vitlab {

// Symmetric label noise: each label is independently replaced, with
// probability rate, by a uniform draw over the other C-1 classes.
struct NoiseSpec {
    double rate = 0.0;
    uint64_t seed = 0;

    void validate() const;  // rate must lie in [0, 0.9]
};

struct CorruptionResult {
    std::vector<int> labels;
    std::vector<uint8_t> flipped;  // 1 where the label was changed
};

// Each sample's draw is keyed by (seed, sample_index), so corrupting any
// subset yields the same noisy label per index regardless of acquisition
// order.
CorruptionResult corrupt_labels(const std::vector<int>& labels, const std::vector<int64_t>& sample_indices,
                                double rate, int num_classes, uint64_t seed);

}  // namespace vitlab
