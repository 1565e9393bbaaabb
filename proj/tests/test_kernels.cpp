// The OpenMP kernels must be bitwise identical to the serial reference for
// any thread count: work is split at row granularity and every row runs the
// same scalar code.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "vitlab/kernels.hpp"
#include "vitlab/rng.hpp"

using namespace vitlab;

namespace {

std::vector<float> random_vec(int64_t n, uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<float> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.gaussian());
    return v;
}

}  // namespace

TEST_CASE("matmul variants match the serial reference bitwise") {
    SplitMix64 shape_rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int64_t m = 1 + static_cast<int64_t>(shape_rng.uniform_int(90));
        const int64_t k = 1 + static_cast<int64_t>(shape_rng.uniform_int(70));
        const int64_t n = 1 + static_cast<int64_t>(shape_rng.uniform_int(80));
        const auto a = random_vec(m * k, 100 + trial);
        const auto b = random_vec(k * n, 200 + trial);
        const auto bt = random_vec(n * k, 300 + trial);

        std::vector<float> c_ref(static_cast<size_t>(m * n)), c_omp(static_cast<size_t>(m * n));
        kernels::ref::matmul_nn(a.data(), b.data(), c_ref.data(), m, k, n);
        kernels::matmul_nn(a.data(), b.data(), c_omp.data(), m, k, n);
        CHECK(c_ref == c_omp);

        kernels::ref::matmul_nt(a.data(), bt.data(), c_ref.data(), m, k, n);
        kernels::matmul_nt(a.data(), bt.data(), c_omp.data(), m, k, n);
        CHECK(c_ref == c_omp);

        std::vector<float> g_ref(static_cast<size_t>(k * n)), g_omp(static_cast<size_t>(k * n));
        const auto dy = random_vec(m * n, 400 + trial);
        kernels::ref::matmul_tn(a.data(), dy.data(), g_ref.data(), m, k, n);
        kernels::matmul_tn(a.data(), dy.data(), g_omp.data(), m, k, n);
        CHECK(g_ref == g_omp);
    }
}

TEST_CASE("matmul accumulate flag adds into the output") {
    const int64_t m = 3, k = 4, n = 5;
    const auto a = random_vec(m * k, 1);
    const auto b = random_vec(k * n, 2);
    std::vector<float> once(static_cast<size_t>(m * n));
    kernels::matmul_nn(a.data(), b.data(), once.data(), m, k, n);
    std::vector<float> twice = once;
    kernels::matmul_nn(a.data(), b.data(), twice.data(), m, k, n, /*acc=*/true);
    for (size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0f * once[i]).epsilon(1e-6));
}

TEST_CASE("row kernels match the serial reference bitwise") {
    const int64_t rows = 137, cols = 65;
    const auto x = random_vec(rows * cols, 11);
    const auto dy = random_vec(rows * cols, 12);
    const auto gamma = random_vec(cols, 13);
    const auto beta = random_vec(cols, 14);

    std::vector<float> y_ref(x.size()), y_omp(x.size());
    kernels::ref::softmax_rows(x.data(), y_ref.data(), rows, cols);
    kernels::softmax_rows(x.data(), y_omp.data(), rows, cols);
    CHECK(y_ref == y_omp);

    std::vector<float> dx_ref(x.size(), 0.0f), dx_omp(x.size(), 0.0f);
    kernels::ref::softmax_rows_backward(y_ref.data(), dy.data(), dx_ref.data(), rows, cols);
    kernels::softmax_rows_backward(y_ref.data(), dy.data(), dx_omp.data(), rows, cols);
    CHECK(dx_ref == dx_omp);

    std::vector<float> xhat_ref(x.size()), xhat_omp(x.size());
    std::vector<float> istd_ref(static_cast<size_t>(rows)), istd_omp(static_cast<size_t>(rows));
    kernels::ref::layer_norm_rows(x.data(), gamma.data(), beta.data(), y_ref.data(), xhat_ref.data(),
                                  istd_ref.data(), rows, cols, 1e-5f);
    kernels::layer_norm_rows(x.data(), gamma.data(), beta.data(), y_omp.data(), xhat_omp.data(),
                             istd_omp.data(), rows, cols, 1e-5f);
    CHECK(y_ref == y_omp);
    CHECK(xhat_ref == xhat_omp);
    CHECK(istd_ref == istd_omp);

    kernels::ref::layer_norm_rows_backward(dy.data(), gamma.data(), xhat_ref.data(), istd_ref.data(),
                                           dx_ref.data(), rows, cols);
    kernels::layer_norm_rows_backward(dy.data(), gamma.data(), xhat_ref.data(), istd_ref.data(),
                                      dx_omp.data(), rows, cols);
    CHECK(dx_ref == dx_omp);

    kernels::ref::gelu(x.data(), y_ref.data(), rows * cols);
    kernels::gelu(x.data(), y_omp.data(), rows * cols);
    CHECK(y_ref == y_omp);

    std::vector<float> cs_ref(static_cast<size_t>(cols)), cs_omp(static_cast<size_t>(cols));
    kernels::ref::column_sums(x.data(), cs_ref.data(), rows, cols);
    kernels::column_sums(x.data(), cs_omp.data(), rows, cols);
    CHECK(cs_ref == cs_omp);
}

TEST_CASE("results do not depend on the thread cap") {
    const int64_t m = 64, k = 64, n = 64;
    const auto a = random_vec(m * k, 21);
    const auto b = random_vec(k * n, 22);
    std::vector<float> c1(static_cast<size_t>(m * n)), c4(static_cast<size_t>(m * n));
    kernels::set_thread_cap(1);
    kernels::matmul_nn(a.data(), b.data(), c1.data(), m, k, n);
    kernels::set_thread_cap(4);
    kernels::matmul_nn(a.data(), b.data(), c4.data(), m, k, n);
    kernels::set_thread_cap(0);
    CHECK(c1 == c4);
}
