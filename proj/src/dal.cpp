#include "vitlab/dal.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "vitlab/errors.hpp"

namespace vitlab {

namespace {

constexpr uint64_t kSeedStream = 0x5eed;
constexpr uint64_t kModelStream = 0x30de1;
constexpr uint64_t kNoiseStream = 0x401;
constexpr uint64_t kAcquireStream = 0xac0;
constexpr uint64_t kRoundStream = 0x20d;

std::vector<int> argmax_rows(const Tensor& probs) {
    const int64_t n = probs.dim(0), C = probs.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        int best = 0;
        for (int64_t c = 1; c < C; ++c)
            if (probs.at(i, c) > probs.at(i, best)) best = static_cast<int>(c);
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

std::vector<int64_t> acquire(const ViTModel& model, const ImageDataset& train, const Pool& pool,
                             const DalConfig& cfg, SplitMix64& rng) {
    const int64_t k = cfg.round_budget;
    switch (cfg.strategy) {
        case Strategy::Random:
            return select_random(pool, k, rng);
        case Strategy::Entropy: {
            if (k > static_cast<int64_t>(pool.unlabeled.size()))
                throw BudgetError("budget exceeds unlabeled pool");
            const Tensor probs = predict_probs(model, train, pool.unlabeled, cfg.train.batch_size);
            const std::vector<double> scores = entropy_scores(probs);
            std::vector<int64_t> picked;
            for (int64_t pos : select_top_k(scores, k)) picked.push_back(pool.unlabeled[static_cast<size_t>(pos)]);
            return picked;
        }
        case Strategy::GciVital: {
            if (k > static_cast<int64_t>(pool.unlabeled.size()))
                throw BudgetError("budget exceeds unlabeled pool");
            const AttentionCentroids centroids =
                compute_centroids(model, train, pool.seed, cfg.train.batch_size);
            std::vector<double> ent, dist;
            ent.reserve(pool.unlabeled.size());
            dist.reserve(pool.unlabeled.size());
            predict_batches(model, train, pool.unlabeled, cfg.train.batch_size,
                            [&](int64_t, const Tensor& probs, const Tensor& attention) {
                                gci_components(probs, attention, centroids, cfg.gci, ent, dist);
                            });
            const std::vector<double> e_n = min_max_normalize(ent);
            const std::vector<double> d_n = min_max_normalize(dist);
            std::vector<double> combined(e_n.size());
            for (size_t i = 0; i < combined.size(); ++i)
                combined[i] = cfg.gci.entropy_weight * e_n[i] + cfg.gci.distance_weight * d_n[i];
            std::vector<int64_t> picked;
            for (int64_t pos : select_top_k(combined, k)) picked.push_back(pool.unlabeled[static_cast<size_t>(pos)]);
            return picked;
        }
    }
    throw InputError("unhandled strategy");
}

}  // namespace

void DalConfig::validate(int64_t train_size) const {
    model.validate();
    if (seed_size < 1 || round_budget < 1 || rounds < 0) throw InputError("dal extents must be positive");
    if (noise_rate < 0.0 || noise_rate > 0.9)
        throw InputError("noise rate " + std::to_string(noise_rate) + " outside [0, 0.9]");
    if (seed_size + static_cast<int64_t>(rounds) * round_budget > train_size)
        throw BudgetError("seed " + std::to_string(seed_size) + " + " + std::to_string(rounds) + " rounds x " +
                          std::to_string(round_budget) + " exceeds train set of " + std::to_string(train_size));
}

std::vector<RoundRecord> run_dal(const ImageDataset& train, const ImageDataset& test, const DalConfig& cfg,
                                 DalAudit* audit, ViTModel* model_out) {
    cfg.validate(train.size());
    if (test.size() < 1) throw InputError("empty test set");

    const std::string model_id = cfg.model.id();
    const std::string strategy_name = to_string(cfg.strategy);
    const uint64_t noise_seed = mix_seed(cfg.master_seed, kNoiseStream);

    // Clean seed set, drawn uniformly from the train pool.
    Pool pool;
    {
        std::vector<int64_t> all(static_cast<size_t>(train.size()));
        std::iota(all.begin(), all.end(), 0);
        SplitMix64 seed_rng(mix_seed(cfg.master_seed, kSeedStream));
        seed_rng.shuffle(all);
        pool.seed.assign(all.begin(), all.begin() + static_cast<ptrdiff_t>(cfg.seed_size));
        pool.unlabeled.assign(all.begin() + static_cast<ptrdiff_t>(cfg.seed_size), all.end());
        std::sort(pool.unlabeled.begin(), pool.unlabeled.end());
    }

    ViTModel model = ViTModel::init(cfg.model, mix_seed(cfg.master_seed, kModelStream));
    const auto initial_weights = cfg.reinit_each_round ? std::make_unique<ViTModel>(model.clone()) : nullptr;

    std::vector<TrainExample> examples;
    examples.reserve(static_cast<size_t>(cfg.seed_size + cfg.rounds * cfg.round_budget));
    for (int64_t i : pool.seed)
        examples.push_back({i, train.labels[static_cast<size_t>(i)], 0.0f});

    std::vector<int64_t> test_idx(static_cast<size_t>(test.size()));
    std::iota(test_idx.begin(), test_idx.end(), 0);

    SplitMix64 acquire_rng(mix_seed(cfg.master_seed, kAcquireStream));
    std::vector<RoundRecord> records;
    std::vector<int64_t> flipped_indices;

    for (int round = 0; round <= cfg.rounds; ++round) {
        if (round > 0) {
            std::vector<int64_t> picked = acquire(model, train, pool, cfg, acquire_rng);
            // Noise is injected only after selection; seed labels stay clean.
            std::vector<int> clean(picked.size());
            for (size_t i = 0; i < picked.size(); ++i) clean[i] = train.labels[static_cast<size_t>(picked[i])];
            const CorruptionResult noisy =
                corrupt_labels(clean, picked, cfg.noise_rate, train.num_classes, noise_seed);
            const float eps = cfg.strategy == Strategy::GciVital ? static_cast<float>(cfg.gci.smoothing) : 0.0f;
            for (size_t i = 0; i < picked.size(); ++i) {
                examples.push_back({picked[i], noisy.labels[i], eps});
                if (noisy.flipped[i]) flipped_indices.push_back(picked[i]);
            }
            pool.labeled.insert(pool.labeled.end(), picked.begin(), picked.end());
            std::vector<int64_t> remaining;
            remaining.reserve(pool.unlabeled.size() - picked.size());
            std::vector<int64_t> picked_sorted = picked;
            std::sort(picked_sorted.begin(), picked_sorted.end());
            std::set_difference(pool.unlabeled.begin(), pool.unlabeled.end(), picked_sorted.begin(),
                                picked_sorted.end(), std::back_inserter(remaining));
            pool.unlabeled = std::move(remaining);
            if (audit) audit->acquired_per_round.push_back(std::move(picked));
            if (cfg.reinit_each_round) model.copy_values_from(*initial_weights);
        }

        const TrainStats stats =
            fit_round(model, train, examples, cfg.train, mix_seed(cfg.master_seed, kRoundStream + static_cast<uint64_t>(round)));

        const Tensor probs = predict_probs(model, test, test_idx, cfg.train.batch_size);
        const std::vector<int> predicted = argmax_rows(probs);

        RoundRecord rec;
        rec.round = round;
        rec.labeled_fraction = static_cast<double>(examples.size()) / static_cast<double>(train.size());
        rec.top1 = top1_accuracy(predicted, test.labels);
        rec.brier = brier_score(probs, test.labels);
        rec.seconds = stats.seconds;
        rec.epochs = stats.epochs_run;
        rec.strategy = strategy_name;
        rec.noise_rate = cfg.noise_rate;
        rec.model_id = model_id;
        rec.seed = cfg.master_seed;
        records.push_back(std::move(rec));

        if (cfg.save_round_checkpoints && !cfg.checkpoint_dir.empty())
            save_checkpoint(model, cfg.checkpoint_dir + "/round" + std::to_string(round) + ".ckpt");
    }

    if (audit) {
        audit->final_pool = pool;
        audit->final_training_set = examples;
        audit->flipped_indices = std::move(flipped_indices);
    }
    if (model_out) *model_out = std::move(model);
    return records;
}

}  // namespace vitlab
