#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vitlab/dataset.hpp"
#include "vitlab/rng.hpp"
#include "vitlab/tensor.hpp"
#include "vitlab/vit.hpp"

namespace vitlab {

// Partition of the training pool. The three sets are disjoint; seed labels
// are never corrupted.
struct Pool {
    std::vector<int64_t> seed;
    std::vector<int64_t> labeled;    // acquired so far (engine holds their labels)
    std::vector<int64_t> unlabeled;

    void validate(int64_t dataset_size) const;
};

enum class Strategy { Random, Entropy, GciVital };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

// K distinct indices drawn uniformly without replacement from the unlabeled
// set.
std::vector<int64_t> select_random(const Pool& pool, int64_t k, SplitMix64& rng);

// Natural-log entropy per probability row; 0*log(0) counts as 0.
std::vector<double> entropy_scores(const Tensor& probs);

// Positions of the K largest scores, ties resolved toward the smaller index.
std::vector<int64_t> select_top_k(std::span<const double> scores, int64_t k);

// Per-class mean of last-layer attention maps over the clean seed set.
struct AttentionCentroids {
    std::vector<Tensor> per_class;  // one [H,T,T] tensor per class
};

AttentionCentroids compute_centroids(const ViTModel& model, const ImageDataset& data,
                                     std::span<const int64_t> seed_indices, int64_t batch_size);

enum class DistanceTarget { PredictedClass, NearestCentroid };

struct GciConfig {
    double entropy_weight = 1.0;
    double distance_weight = 1.0;
    DistanceTarget target = DistanceTarget::PredictedClass;
    double smoothing = 0.1;  // label smoothing applied to samples this strategy acquires
};

// sqrt of the summed squared differences over the flattened tensors.
double frobenius_distance(const Tensor& a, const Tensor& b);

// Min-max rescaling to [0,1]; an all-equal input maps to all zeros.
std::vector<double> min_max_normalize(std::span<const double> v);

// Combined informativeness: min-max-normalized entropy plus min-max-
// normalized Frobenius distance between each sample's attention map and its
// predicted-class (or nearest) centroid, both normalized over this pool.
std::vector<double> gci_vital_scores(const Tensor& probs, std::span<const Tensor> attentions,
                                     const AttentionCentroids& centroids, const GciConfig& cfg = {});

// Raw components for one batch, used by the engine to score large pools
// without holding every attention map; batch_attention is [b,H,T,T].
void gci_components(const Tensor& probs, const Tensor& batch_attention, const AttentionCentroids& centroids,
                    const GciConfig& cfg, std::vector<double>& entropy_out, std::vector<double>& distance_out);

}  // namespace vitlab
