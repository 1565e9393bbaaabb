// Compares the serial reference kernels against the OpenMP versions, and
// times the model forward pass across patch sizes (token-count scaling).

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "vitlab/dataset.hpp"
#include "vitlab/kernels.hpp"
#include "vitlab/rng.hpp"
#include "vitlab/vit.hpp"

using vitlab::SplitMix64;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best = std::min(best, s);
    }
    return best;
}

std::vector<float> random_vec(int64_t n, uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<float> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.gaussian());
    return v;
}

void bench_matmul(int64_t m, int64_t k, int64_t n) {
    const auto a = random_vec(m * k, 1);
    const auto b = random_vec(k * n, 2);
    std::vector<float> c(static_cast<size_t>(m * n));
    const double serial = time_best_of(5, [&] { vitlab::kernels::ref::matmul_nn(a.data(), b.data(), c.data(), m, k, n); });
    const double parallel = time_best_of(5, [&] { vitlab::kernels::matmul_nn(a.data(), b.data(), c.data(), m, k, n); });
    const double gflops = 2.0 * static_cast<double>(m) * static_cast<double>(k) * static_cast<double>(n) / 1e9;
    std::printf("matmul %5lldx%4lldx%4lld  serial %8.3f ms (%6.2f GF/s)  omp %8.3f ms (%6.2f GF/s)  speedup %.2fx\n",
                static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n),
                serial * 1e3, gflops / serial, parallel * 1e3, gflops / parallel, serial / parallel);
}

void bench_rows(const char* name, int64_t rows, int64_t cols,
                const std::function<void(const float*, float*, int64_t, int64_t)>& serial_fn,
                const std::function<void(const float*, float*, int64_t, int64_t)>& omp_fn) {
    const auto x = random_vec(rows * cols, 3);
    std::vector<float> y(static_cast<size_t>(rows * cols));
    const double serial = time_best_of(5, [&] { serial_fn(x.data(), y.data(), rows, cols); });
    const double parallel = time_best_of(5, [&] { omp_fn(x.data(), y.data(), rows, cols); });
    std::printf("%-10s %6lldx%-4lld serial %8.3f ms             omp %8.3f ms             speedup %.2fx\n",
                name, static_cast<long long>(rows), static_cast<long long>(cols), serial * 1e3, parallel * 1e3,
                serial / parallel);
}

void bench_forward(int64_t patch) {
    vitlab::ViTConfig cfg;
    cfg.patch_size = patch;
    cfg.embed_dim = 64;
    cfg.layers = 4;
    cfg.heads = 4;
    cfg.mlp_dim = 256;
    const vitlab::ViTModel model = vitlab::ViTModel::init(cfg, 42);
    vitlab::SynthConfig scfg;
    scfg.samples_per_class = 8;
    const vitlab::ImageDataset data = vitlab::synth_blobs(scfg);
    std::vector<int64_t> idx(64);
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i % data.size());
    vitlab::Tensor batch;
    vitlab::normalize_batch(data, idx, batch);
    const double t = time_best_of(3, [&] { (void)vitlab::forward(model, batch); });
    std::printf("forward  P=%lld (T=%lld tokens)  batch 64: %8.2f ms\n", static_cast<long long>(patch),
                static_cast<long long>(cfg.seq_len()), t * 1e3);
}

}  // namespace

int main() {
    std::printf("threads: %d\n\n", vitlab::kernels::threads());

    bench_matmul(4160, 64, 64);
    bench_matmul(4160, 64, 256);
    bench_matmul(512, 512, 512);
    std::printf("\n");

    bench_rows("softmax", 16384, 65,
               [](const float* x, float* y, int64_t r, int64_t c) { vitlab::kernels::ref::softmax_rows(x, y, r, c); },
               [](const float* x, float* y, int64_t r, int64_t c) { vitlab::kernels::softmax_rows(x, y, r, c); });
    bench_rows("gelu", 4096, 256,
               [](const float* x, float* y, int64_t r, int64_t c) { vitlab::kernels::ref::gelu(x, y, r * c); },
               [](const float* x, float* y, int64_t r, int64_t c) { vitlab::kernels::gelu(x, y, r * c); });
    std::printf("\n");

    bench_forward(4);
    bench_forward(8);
    return 0;
}
