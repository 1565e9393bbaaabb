#include "vitlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "vitlab/errors.hpp"

namespace vitlab {

double top1_accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw InputError("accuracy needs equal, non-empty prediction and truth lists");
    int64_t correct = 0;
    for (size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

double brier_score(const Tensor& probs, std::span<const int> truth) {
    if (probs.rank() != 2 || static_cast<size_t>(probs.dim(0)) != truth.size() || truth.empty())
        throw InputError("brier score needs [n, classes] probabilities with one label per row");
    const int64_t n = probs.dim(0), C = probs.dim(1);
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int64_t c = 0; c < C; ++c) sum += static_cast<double>(probs.at(i, c));
        if (std::abs(sum - 1.0) > 1e-4)
            throw InputError("probability row " + std::to_string(i) + " sums to " + std::to_string(sum));
        const int y = truth[static_cast<size_t>(i)];
        if (y < 0 || y >= C) throw InputError("label " + std::to_string(y) + " out of range");
        double row = 0.0;
        for (int64_t c = 0; c < C; ++c) {
            const double d = static_cast<double>(probs.at(i, c)) - (c == y ? 1.0 : 0.0);
            row += d * d;
        }
        total += row;
    }
    return total / static_cast<double>(n);
}

namespace {

using CellKey = std::tuple<std::string, double, std::string, double>;

CellKey key_of(const RoundRecord& r, const GridKeyOptions& k) {
    return {k.by_model ? r.model_id : "*", k.by_noise ? r.noise_rate : -1.0,
            k.by_strategy ? r.strategy : "*", k.by_proportion ? r.labeled_fraction : -1.0};
}

}  // namespace

std::vector<GridCell> aggregate_grid(std::span<const RoundRecord> records, const GridKeyOptions& keys) {
    if (records.empty()) throw InputError("no records to aggregate");
    std::map<CellKey, GridCell> cells;
    for (const auto& r : records) {
        const CellKey k = key_of(r, keys);
        auto& c = cells[k];
        if (c.run_count == 0) {
            c.model_id = std::get<0>(k);
            c.noise_rate = std::get<1>(k);
            c.strategy = std::get<2>(k);
            c.labeled_fraction = std::get<3>(k);
        }
        c.mean_top1 += r.top1;
        c.mean_brier += r.brier;
        c.mean_seconds += r.seconds;
        c.run_count += 1;
    }
    std::vector<GridCell> out;
    out.reserve(cells.size());
    for (auto& [k, c] : cells) {
        c.mean_top1 /= static_cast<double>(c.run_count);
        c.mean_brier /= static_cast<double>(c.run_count);
        c.mean_seconds /= static_cast<double>(c.run_count);
        out.push_back(std::move(c));
    }
    return out;
}

const GridCell& find_cell(std::span<const GridCell> cells, const std::string& model_id, double noise_rate,
                          const std::string& strategy, double labeled_fraction) {
    for (const auto& c : cells)
        if (c.model_id == model_id && c.noise_rate == noise_rate && c.strategy == strategy &&
            c.labeled_fraction == labeled_fraction)
            return c;
    throw CoverageError("no cell for model=" + model_id + " noise=" + std::to_string(noise_rate) +
                        " strategy=" + strategy + " proportion=" + std::to_string(labeled_fraction));
}

std::vector<DeltaCell> delta_vs_random(std::span<const GridCell> cells) {
    std::map<CellKey, const GridCell*> random_cells;
    for (const auto& c : cells)
        if (c.strategy == "random") random_cells[{c.model_id, c.noise_rate, "random", c.labeled_fraction}] = &c;

    std::vector<DeltaCell> out;
    out.reserve(cells.size());
    for (const auto& c : cells) {
        const auto it = random_cells.find({c.model_id, c.noise_rate, "random", c.labeled_fraction});
        if (it == random_cells.end())
            throw CoverageError("missing random baseline for model=" + c.model_id +
                                " noise=" + std::to_string(c.noise_rate) +
                                " proportion=" + std::to_string(c.labeled_fraction));
        const GridCell& base = *it->second;
        out.push_back({c.model_id, c.noise_rate, c.strategy, c.labeled_fraction,
                       c.mean_top1 - base.mean_top1, base.mean_brier - c.mean_brier});
    }
    return out;
}

}  // namespace vitlab
