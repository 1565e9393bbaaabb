#include "vitlab/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "vitlab/errors.hpp"

namespace vitlab {

void Pool::validate(int64_t dataset_size) const {
    std::unordered_set<int64_t> seen;
    auto check = [&](const std::vector<int64_t>& v, const char* which) {
        for (int64_t i : v) {
            if (i < 0 || i >= dataset_size)
                throw IndexError(std::string(which) + " index " + std::to_string(i) + " out of range");
            if (!seen.insert(i).second)
                throw InputError("pool sets overlap at index " + std::to_string(i));
        }
    };
    check(seed, "seed");
    check(labeled, "labeled");
    check(unlabeled, "unlabeled");
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "random") return Strategy::Random;
    if (s == "entropy") return Strategy::Entropy;
    if (s == "gci_vital") return Strategy::GciVital;
    throw InputError("unknown strategy '" + s + "' (expected random, entropy or gci_vital)");
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::Entropy: return "entropy";
        case Strategy::GciVital: return "gci_vital";
    }
    return "?";
}

std::vector<int64_t> select_random(const Pool& pool, int64_t k, SplitMix64& rng) {
    const int64_t n = static_cast<int64_t>(pool.unlabeled.size());
    if (k > n)
        throw BudgetError("requested " + std::to_string(k) + " samples from an unlabeled pool of " +
                          std::to_string(n));
    std::vector<int64_t> u = pool.unlabeled;
    // Partial Fisher-Yates: the first k slots end up a uniform sample.
    for (int64_t i = 0; i < k; ++i) {
        const int64_t j = i + static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n - i)));
        std::swap(u[static_cast<size_t>(i)], u[static_cast<size_t>(j)]);
    }
    u.resize(static_cast<size_t>(k));
    return u;
}

std::vector<double> entropy_scores(const Tensor& probs) {
    if (probs.rank() != 2) throw InputError("entropy expects [n, classes] probabilities, got " + probs.shape_str());
    const int64_t n = probs.dim(0), C = probs.dim(1);
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        double sum = 0.0, h = 0.0;
        for (int64_t c = 0; c < C; ++c) {
            const double p = static_cast<double>(probs.at(i, c));
            if (p < -1e-9) throw InputError("negative probability at row " + std::to_string(i));
            sum += p;
            if (p > 0.0) h -= p * std::log(p);
        }
        if (std::abs(sum - 1.0) > 1e-4)
            throw InputError("probability row " + std::to_string(i) + " sums to " + std::to_string(sum));
        out[static_cast<size_t>(i)] = h;
    }
    return out;
}

std::vector<int64_t> select_top_k(std::span<const double> scores, int64_t k) {
    const int64_t n = static_cast<int64_t>(scores.size());
    if (k > n)
        throw BudgetError("top-k of " + std::to_string(k) + " from " + std::to_string(n) + " scores");
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<ptrdiff_t>(k), idx.end(),
                      [&](int64_t a, int64_t b) {
                          if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
                              return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
                          return a < b;
                      });
    idx.resize(static_cast<size_t>(k));
    return idx;
}

AttentionCentroids compute_centroids(const ViTModel& model, const ImageDataset& data,
                                     std::span<const int64_t> seed_indices, int64_t batch_size) {
    const int C = model.config.num_classes;
    const int64_t H = model.config.heads, T = model.config.seq_len();
    const int64_t map_len = H * T * T;

    std::vector<std::vector<double>> sums(static_cast<size_t>(C), std::vector<double>(static_cast<size_t>(map_len), 0.0));
    std::vector<int64_t> counts(static_cast<size_t>(C), 0);

    predict_batches(model, data, seed_indices, batch_size,
                    [&](int64_t off, const Tensor&, const Tensor& attention) {
                        const int64_t b = attention.dim(0);
                        for (int64_t i = 0; i < b; ++i) {
                            const int cls = data.labels[static_cast<size_t>(seed_indices[static_cast<size_t>(off + i)])];
                            auto& acc = sums[static_cast<size_t>(cls)];
                            const float* src = attention.data.data() + i * map_len;
                            for (int64_t j = 0; j < map_len; ++j) acc[static_cast<size_t>(j)] += static_cast<double>(src[j]);
                            counts[static_cast<size_t>(cls)]++;
                        }
                    });

    AttentionCentroids out;
    out.per_class.reserve(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) {
        if (counts[static_cast<size_t>(c)] == 0)
            throw CoverageError("class " + std::to_string(c) + " has no samples in the clean seed set");
        Tensor t({H, T, T});
        for (int64_t j = 0; j < map_len; ++j)
            t.data[static_cast<size_t>(j)] =
                static_cast<float>(sums[static_cast<size_t>(c)][static_cast<size_t>(j)] /
                                   static_cast<double>(counts[static_cast<size_t>(c)]));
        out.per_class.push_back(std::move(t));
    }
    return out;
}

double frobenius_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("frobenius distance shapes differ: " + a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a.at(i)) - static_cast<double>(b.at(i));
        s += d * d;
    }
    return std::sqrt(s);
}

std::vector<double> min_max_normalize(std::span<const double> v) {
    std::vector<double> out(v.size(), 0.0);
    if (v.empty()) return out;
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double span = *mx - *mn;
    if (span <= 0.0) return out;  // all equal -> zeros
    for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *mn) / span;
    return out;
}

namespace {

double distance_for_row(const float* attn, int64_t map_len, int predicted, const AttentionCentroids& centroids,
                        DistanceTarget target) {
    auto dist_to = [&](int c) {
        const Tensor& cen = centroids.per_class[static_cast<size_t>(c)];
        if (cen.numel() != map_len)
            throw ShapeError("attention map length " + std::to_string(map_len) + " vs centroid " +
                             cen.shape_str());
        double s = 0.0;
        for (int64_t j = 0; j < map_len; ++j) {
            const double d = static_cast<double>(attn[j]) - static_cast<double>(cen.data[static_cast<size_t>(j)]);
            s += d * d;
        }
        return std::sqrt(s);
    };
    if (target == DistanceTarget::PredictedClass) return dist_to(predicted);
    double best = dist_to(0);
    for (size_t c = 1; c < centroids.per_class.size(); ++c) best = std::min(best, dist_to(static_cast<int>(c)));
    return best;
}

int argmax_row(const Tensor& probs, int64_t i) {
    const int64_t C = probs.dim(1);
    int best = 0;
    for (int64_t c = 1; c < C; ++c)
        if (probs.at(i, c) > probs.at(i, best)) best = static_cast<int>(c);
    return best;
}

}  // namespace

void gci_components(const Tensor& probs, const Tensor& batch_attention, const AttentionCentroids& centroids,
                    const GciConfig& cfg, std::vector<double>& entropy_out, std::vector<double>& distance_out) {
    if (batch_attention.rank() != 4 || batch_attention.dim(0) != probs.dim(0))
        throw ShapeError("attention batch " + batch_attention.shape_str() + " does not match probs " +
                         probs.shape_str());
    const int64_t b = probs.dim(0);
    const int64_t map_len = batch_attention.numel() / b;
    const std::vector<double> ent = entropy_scores(probs);
    for (int64_t i = 0; i < b; ++i) {
        entropy_out.push_back(ent[static_cast<size_t>(i)]);
        distance_out.push_back(distance_for_row(batch_attention.data.data() + i * map_len, map_len,
                                                argmax_row(probs, i), centroids, cfg.target));
    }
}

std::vector<double> gci_vital_scores(const Tensor& probs, std::span<const Tensor> attentions,
                                     const AttentionCentroids& centroids, const GciConfig& cfg) {
    if (probs.rank() != 2 || static_cast<int64_t>(attentions.size()) != probs.dim(0))
        throw ShapeError("gci scores need one attention map per probability row");
    const int64_t n = probs.dim(0);
    std::vector<double> ent = entropy_scores(probs);
    std::vector<double> dist(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const Tensor& a = attentions[static_cast<size_t>(i)];
        dist[static_cast<size_t>(i)] = distance_for_row(a.data.data(), a.numel(), argmax_row(probs, i),
                                                        centroids, cfg.target);
    }
    const std::vector<double> e_n = min_max_normalize(ent);
    const std::vector<double> d_n = min_max_normalize(dist);
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        out[static_cast<size_t>(i)] =
            cfg.entropy_weight * e_n[static_cast<size_t>(i)] + cfg.distance_weight * d_n[static_cast<size_t>(i)];
    return out;
}

}  // namespace vitlab
