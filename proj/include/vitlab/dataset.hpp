#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vitlab/rng.hpp"
#include "vitlab/tensor.hpp"

namespace vitlab {

// Channel-planar mean/std used for normalization (R,G,B).
inline constexpr std::array<double, 3> kNormMean = {0.4914, 0.4822, 0.4465};
inline constexpr std::array<double, 3> kNormStd = {0.2023, 0.1994, 0.2010};

// Images are stored as raw bytes, one sample = 3*side*side values in
// channel-planar order (all R, all G, all B), matching the CIFAR layout.
struct ImageDataset {
    std::string name;
    int64_t side = 32;
    int num_classes = 0;
    std::vector<uint8_t> pixels;
    std::vector<int> labels;

    int64_t size() const { return static_cast<int64_t>(labels.size()); }
    int64_t bytes_per_image() const { return 3 * side * side; }

    std::span<const uint8_t> image(int64_t i) const {
        return {pixels.data() + i * bytes_per_image(), static_cast<size_t>(bytes_per_image())};
    }

    std::vector<int64_t> class_counts() const;
};

enum class CifarVariant { Cifar10, Cifar100 };

// CIFAR binary batches: cifar10 records are 3073 bytes (label + 3072
// pixels), cifar100 records are 3074 (coarse label, fine label, pixels);
// fine labels are kept.
ImageDataset load_cifar_binary(const std::string& path, CifarVariant variant);
ImageDataset load_cifar_binary(const std::vector<std::string>& paths, CifarVariant variant);

// Writes the cifar10 record layout (1 label byte + 3072 pixels); requires
// side == 32 and labels < 256.
void save_cifar_binary(const ImageDataset& ds, const std::string& path);

struct SynthConfig {
    int num_classes = 10;
    int64_t samples_per_class = 100;
    int64_t side = 32;
    double sigma = 8.0;
    uint64_t seed = 1;
    // Same seed + different stream keeps the class templates and draws fresh
    // sample noise; used to generate disjoint train/test sets.
    uint64_t stream = 0;

    void validate() const;
};

// Per class: one fixed random template image; samples are the template plus
// Gaussian pixel noise, clamped to [0,255]. Deterministic per (seed,stream).
ImageDataset synth_blobs(const SynthConfig& config);

// In-place horizontal mirror of a channel-planar image.
void hflip(uint8_t* img, int64_t side);

// Training augmentation: zero-pad by 4, random crop back to side x side,
// then horizontal flip with probability 0.5. flipped_out reports the flip
// decision when non-null.
std::vector<uint8_t> augment(std::span<const uint8_t> img, int64_t side, SplitMix64& rng,
                             bool* flipped_out = nullptr);

// (pixel/255 - mean_c) / std_c per channel; output shape [3,side,side].
Tensor normalize_image(std::span<const uint8_t> img, int64_t side);

// Inverse of normalize_image up to float rounding; returns pixel/255 values.
std::vector<float> denormalize_image(const Tensor& t);

// Fills dst (shape [B,3,S,S] row-major) with the normalized batch.
void normalize_batch(const ImageDataset& ds, std::span<const int64_t> indices, Tensor& dst);

}  // namespace vitlab
