#include "vitlab/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vitlab/errors.hpp"

namespace vitlab {

std::vector<int64_t> ImageDataset::class_counts() const {
    std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
    for (int label : labels) counts[static_cast<size_t>(label)]++;
    return counts;
}

namespace {

constexpr int64_t kCifarPixels = 3072;

ImageDataset load_one_cifar(const std::string& path, CifarVariant variant, ImageDataset&& into) {
    if (!std::filesystem::exists(path)) throw PathError("dataset file not found: " + path);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw PathError("cannot open dataset file: " + path);
    f.seekg(0, std::ios::end);
    const int64_t len = static_cast<int64_t>(f.tellg());
    f.seekg(0);

    const bool fine = variant == CifarVariant::Cifar100;
    const int64_t record = fine ? kCifarPixels + 2 : kCifarPixels + 1;
    if (len <= 0 || len % record != 0)
        throw FormatError("file length " + std::to_string(len) + " is not a multiple of record size " +
                          std::to_string(record) + ": " + path);
    const int64_t n = len / record;
    const int max_label = fine ? 100 : 10;

    ImageDataset ds = std::move(into);
    ds.side = 32;
    ds.num_classes = max_label;
    ds.pixels.reserve(ds.pixels.size() + static_cast<size_t>(n * kCifarPixels));
    ds.labels.reserve(ds.labels.size() + static_cast<size_t>(n));

    std::vector<uint8_t> rec(static_cast<size_t>(record));
    for (int64_t i = 0; i < n; ++i) {
        f.read(reinterpret_cast<char*>(rec.data()), record);
        if (!f) throw FormatError("short read at record " + std::to_string(i) + ": " + path);
        int label;
        if (fine) {
            const int coarse = rec[0];
            label = rec[1];
            if (coarse >= 20)
                throw FormatError("coarse label " + std::to_string(coarse) + " out of range at record " +
                                  std::to_string(i) + ": " + path);
        } else {
            label = rec[0];
        }
        if (label >= max_label)
            throw FormatError("label " + std::to_string(label) + " out of range [0," + std::to_string(max_label) +
                              ") at record " + std::to_string(i) + ": " + path);
        ds.labels.push_back(label);
        ds.pixels.insert(ds.pixels.end(), rec.begin() + (fine ? 2 : 1), rec.end());
    }
    return ds;
}

}  // namespace

ImageDataset load_cifar_binary(const std::string& path, CifarVariant variant) {
    return load_cifar_binary(std::vector<std::string>{path}, variant);
}

ImageDataset load_cifar_binary(const std::vector<std::string>& paths, CifarVariant variant) {
    if (paths.empty()) throw InputError("no dataset files given");
    ImageDataset ds;
    ds.name = variant == CifarVariant::Cifar100 ? "cifar100" : "cifar10";
    for (const auto& p : paths) ds = load_one_cifar(p, variant, std::move(ds));
    return ds;
}

void save_cifar_binary(const ImageDataset& ds, const std::string& path) {
    if (ds.side != 32) throw InputError("cifar binary layout requires 32x32 images");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw PathError("cannot write dataset file: " + path);
    for (int64_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] < 0 || ds.labels[i] > 255) throw InputError("label does not fit in one byte");
        const uint8_t label = static_cast<uint8_t>(ds.labels[i]);
        f.write(reinterpret_cast<const char*>(&label), 1);
        const auto img = ds.image(i);
        f.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    }
}

void SynthConfig::validate() const {
    if (num_classes < 2) throw InputError("synth requires at least 2 classes");
    if (samples_per_class <= 0 || side <= 0) throw InputError("synth extents must be positive");
    if (sigma < 0.0) throw InputError("synth sigma must be >= 0");
}

ImageDataset synth_blobs(const SynthConfig& config) {
    config.validate();
    ImageDataset ds;
    ds.name = "synth";
    ds.side = config.side;
    ds.num_classes = config.num_classes;
    const int64_t npix = ds.bytes_per_image();
    const int64_t total = config.num_classes * config.samples_per_class;
    ds.pixels.resize(static_cast<size_t>(total * npix));
    ds.labels.resize(static_cast<size_t>(total));

    std::vector<uint8_t> templates(static_cast<size_t>(config.num_classes * npix));
    for (int c = 0; c < config.num_classes; ++c) {
        SplitMix64 trng(mix_seed(config.seed, 0x7e00 + static_cast<uint64_t>(c)));
        for (int64_t p = 0; p < npix; ++p)
            templates[static_cast<size_t>(c * npix + p)] = static_cast<uint8_t>(trng.uniform_int(256));
    }

    const uint64_t stream_seed = mix_seed(config.seed, 0x5a00 + config.stream);
    for (int c = 0; c < config.num_classes; ++c) {
        const uint8_t* tmpl = templates.data() + c * npix;
        for (int64_t j = 0; j < config.samples_per_class; ++j) {
            const int64_t i = c * config.samples_per_class + j;
            ds.labels[static_cast<size_t>(i)] = c;
            SplitMix64 rng(mix_seed(stream_seed, static_cast<uint64_t>(i)));
            uint8_t* dst = ds.pixels.data() + i * npix;
            for (int64_t p = 0; p < npix; ++p) {
                const double v = static_cast<double>(tmpl[p]) + config.sigma * rng.gaussian();
                dst[p] = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
    return ds;
}

void hflip(uint8_t* img, int64_t side) {
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < side; ++y) {
            uint8_t* row = img + (c * side + y) * side;
            std::reverse(row, row + side);
        }
}

std::vector<uint8_t> augment(std::span<const uint8_t> img, int64_t side, SplitMix64& rng, bool* flipped_out) {
    constexpr int64_t pad = 4;
    const int64_t dy = static_cast<int64_t>(rng.uniform_int(2 * pad + 1));
    const int64_t dx = static_cast<int64_t>(rng.uniform_int(2 * pad + 1));
    std::vector<uint8_t> out(img.size());
    // Crop window (dy,dx) of the zero-padded canvas: source pixel (y,x) maps
    // from padded (y+dy, x+dx), i.e. original (y+dy-pad, x+dx-pad).
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < side; ++y) {
            const int64_t sy = y + dy - pad;
            for (int64_t x = 0; x < side; ++x) {
                const int64_t sx = x + dx - pad;
                uint8_t v = 0;
                if (sy >= 0 && sy < side && sx >= 0 && sx < side)
                    v = img[(c * side + sy) * side + sx];
                out[static_cast<size_t>((c * side + y) * side + x)] = v;
            }
        }
    const bool flip = rng.uniform() < 0.5;
    if (flip) hflip(out.data(), side);
    if (flipped_out) *flipped_out = flip;
    return out;
}

Tensor normalize_image(std::span<const uint8_t> img, int64_t side) {
    Tensor t({3, side, side});
    const int64_t plane = side * side;
    for (int64_t c = 0; c < 3; ++c) {
        const float inv_std = static_cast<float>(1.0 / kNormStd[static_cast<size_t>(c)]);
        const float mean = static_cast<float>(kNormMean[static_cast<size_t>(c)]);
        for (int64_t p = 0; p < plane; ++p)
            t.data[static_cast<size_t>(c * plane + p)] =
                (static_cast<float>(img[static_cast<size_t>(c * plane + p)]) / 255.0f - mean) * inv_std;
    }
    return t;
}

std::vector<float> denormalize_image(const Tensor& t) {
    if (t.rank() != 3 || t.dim(0) != 3) throw ShapeError("expected [3,S,S] tensor, got " + t.shape_str());
    const int64_t plane = t.dim(1) * t.dim(2);
    std::vector<float> out(static_cast<size_t>(t.numel()));
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t p = 0; p < plane; ++p)
            out[static_cast<size_t>(c * plane + p)] =
                t.data[static_cast<size_t>(c * plane + p)] * static_cast<float>(kNormStd[static_cast<size_t>(c)]) +
                static_cast<float>(kNormMean[static_cast<size_t>(c)]);
    return out;
}

void normalize_batch(const ImageDataset& ds, std::span<const int64_t> indices, Tensor& dst) {
    const int64_t B = static_cast<int64_t>(indices.size());
    const int64_t S = ds.side;
    dst = Tensor({B, 3, S, S});
    const int64_t per = ds.bytes_per_image();
    for (int64_t b = 0; b < B; ++b) {
        const Tensor one = normalize_image(ds.image(indices[static_cast<size_t>(b)]), S);
        std::copy_n(one.data.begin(), per, dst.data.begin() + b * per);
    }
}

}  // namespace vitlab
