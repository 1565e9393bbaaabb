#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "vitlab/errors.hpp"
#include "vitlab/noise.hpp"
#include "vitlab/rng.hpp"

using namespace vitlab;

namespace {

std::vector<int> uniform_labels(int64_t n, int classes, uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<int> out(static_cast<size_t>(n));
    for (auto& v : out) v = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(classes)));
    return out;
}

std::vector<int64_t> iota_indices(int64_t n) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace

TEST_CASE("rate zero leaves labels untouched") {
    const auto labels = uniform_labels(500, 10, 1);
    const auto result = corrupt_labels(labels, iota_indices(500), 0.0, 10, 2);
    CHECK(result.labels == labels);
    for (uint8_t f : result.flipped) CHECK(f == 0);
}

TEST_CASE("flip fraction matches the rate within the binomial bound") {
    const int64_t n = 100000;
    const auto labels = uniform_labels(n, 10, 3);
    const auto result = corrupt_labels(labels, iota_indices(n), 0.9, 10, 4);
    int64_t flips = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (result.flipped[i]) {
            ++flips;
            CHECK(result.labels[i] != labels[i]);
        } else {
            CHECK(result.labels[i] == labels[i]);
        }
    }
    const double frac = static_cast<double>(flips) / static_cast<double>(n);
    const double bound = 3.0 * std::sqrt(0.9 * 0.1 / static_cast<double>(n));
    CHECK(std::abs(frac - 0.9) <= bound);
}

TEST_CASE("flip targets are uniform over the other classes (chi-square)") {
    const int64_t n = 1000000;
    const int C = 10;
    const auto labels = uniform_labels(n, C, 5);
    const auto result = corrupt_labels(labels, iota_indices(n), 0.5, C, 6);

    // counts[c][t] over flipped samples only
    std::vector<std::vector<int64_t>> counts(static_cast<size_t>(C), std::vector<int64_t>(static_cast<size_t>(C), 0));
    for (size_t i = 0; i < labels.size(); ++i)
        if (result.flipped[i]) counts[static_cast<size_t>(labels[i])][static_cast<size_t>(result.labels[i])]++;

    double chi2 = 0.0;
    for (int c = 0; c < C; ++c) {
        int64_t total = 0;
        for (int t = 0; t < C; ++t) total += counts[static_cast<size_t>(c)][static_cast<size_t>(t)];
        CHECK(counts[static_cast<size_t>(c)][static_cast<size_t>(c)] == 0);
        const double expected = static_cast<double>(total) / static_cast<double>(C - 1);
        for (int t = 0; t < C; ++t) {
            if (t == c) continue;
            const double d = static_cast<double>(counts[static_cast<size_t>(c)][static_cast<size_t>(t)]) - expected;
            chi2 += d * d / expected;
        }
    }
    // df = C*(C-1) cells minus C per-class totals = 80; critical value at
    // alpha = 0.01 is 112.329.
    CHECK(chi2 <= 112.329);
}

TEST_CASE("corruption commutes with subsetting via per-index seeds") {
    const int64_t n = 2000;
    const auto labels = uniform_labels(n, 10, 7);
    const auto indices = iota_indices(n);
    const auto full = corrupt_labels(labels, indices, 0.4, 10, 8);

    std::vector<int> sub_labels;
    std::vector<int64_t> sub_indices;
    for (int64_t i = 0; i < n; i += 3) {
        sub_labels.push_back(labels[static_cast<size_t>(i)]);
        sub_indices.push_back(i);
    }
    const auto sub = corrupt_labels(sub_labels, sub_indices, 0.4, 10, 8);
    for (size_t j = 0; j < sub_indices.size(); ++j) {
        CHECK(sub.labels[j] == full.labels[static_cast<size_t>(sub_indices[j])]);
        CHECK(sub.flipped[j] == full.flipped[static_cast<size_t>(sub_indices[j])]);
    }
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(corrupt_labels({0, 1}, {0, 1}, 0.5, 1, 1), InputError);
    CHECK_THROWS_AS(corrupt_labels({0, 5}, {0, 1}, 0.5, 4, 1), IndexError);
    CHECK_THROWS_AS(corrupt_labels({0, 1}, {0, 1}, 1.0, 4, 1), InputError);
    CHECK_THROWS_AS(corrupt_labels({0, 1}, {0}, 0.5, 4, 1), InputError);

    NoiseSpec ok{0.9, 1};
    ok.validate();
    NoiseSpec bad{0.95, 1};
    CHECK_THROWS_AS(bad.validate(), InputError);
}
