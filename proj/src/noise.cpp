#include "vitlab/noise.hpp"

#include <string>

#include "vitlab/errors.hpp"
#include "vitlab/rng.hpp"

namespace vitlab {

namespace {
constexpr uint64_t kNoiseStream = 0xf1a9;
}

void NoiseSpec::validate() const {
    if (rate < 0.0 || rate > 0.9)
        throw InputError("noise rate " + std::to_string(rate) + " outside [0, 0.9]");
}

CorruptionResult corrupt_labels(const std::vector<int>& labels, const std::vector<int64_t>& sample_indices,
                                double rate, int num_classes, uint64_t seed) {
    if (num_classes < 2) throw InputError("symmetric noise requires at least 2 classes");
    if (rate < 0.0 || rate >= 1.0) throw InputError("noise rate " + std::to_string(rate) + " outside [0, 1)");
    if (labels.size() != sample_indices.size()) throw InputError("labels and sample indices differ in length");

    CorruptionResult out;
    out.labels.resize(labels.size());
    out.flipped.assign(labels.size(), 0);
    const uint64_t stream_seed = mix_seed(seed, kNoiseStream);
    for (size_t i = 0; i < labels.size(); ++i) {
        const int label = labels[i];
        if (label < 0 || label >= num_classes)
            throw IndexError("label " + std::to_string(label) + " out of range [0," +
                             std::to_string(num_classes) + ")");
        SplitMix64 rng(mix_seed(stream_seed, static_cast<uint64_t>(sample_indices[i])));
        if (rng.uniform() < rate) {
            const int offset = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(num_classes - 1)));
            out.labels[i] = (label + offset) % num_classes;
            out.flipped[i] = 1;
        } else {
            out.labels[i] = label;
        }
    }
    return out;
}

}  // namespace vitlab
