#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <vector>

#include <omp.h>

namespace vitlab::kernels {

// Worker cap for the OpenMP kernels. The grid runner lowers this when it
// multiplexes whole runs across threads so the machine is not oversubscribed.
inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{0};  // 0 = use omp_get_max_threads()
    return cap;
}

inline void set_thread_cap(int n) { thread_cap().store(n); }

inline int threads() {
    const int cap = thread_cap().load();
    const int hw = omp_get_max_threads();
    return cap > 0 ? std::min(cap, hw) : hw;
}

// Every parallel kernel splits work at row (or column) granularity and
// computes each row with the identical serial routine, so results are
// bitwise equal to the ref:: implementations for any thread count.

namespace detail {

constexpr int64_t kParFlops = 1 << 15;
constexpr int64_t kRowChunk = 32;

// Rows [r0,r1) of c = a*b. Full 4-row x JT-column tiles accumulate in local
// arrays the compiler keeps in registers across the k loop; the ragged edge
// streams through c directly. The serial reference and the threaded kernel
// both run this exact routine per row range, so results are bitwise equal
// for any thread count.
template <class T>
inline void matmul_nn_tile(const T* a0, const T* a1, const T* a2, const T* a3, const T* b, T* c0, T* c1,
                           T* c2, T* c3, int64_t k, int64_t n, int64_t j0, bool acc) {
    constexpr int64_t JT = 256 / sizeof(T);
    T t0[JT], t1[JT], t2[JT], t3[JT];
    for (int64_t j = 0; j < JT; ++j) t0[j] = t1[j] = t2[j] = t3[j] = T(0);
    for (int64_t kk = 0; kk < k; ++kk) {
        const T* br = b + kk * n + j0;
        const T w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
        for (int64_t j = 0; j < JT; ++j) {
            t0[j] += w0 * br[j];
            t1[j] += w1 * br[j];
            t2[j] += w2 * br[j];
            t3[j] += w3 * br[j];
        }
    }
    if (acc) {
        for (int64_t j = 0; j < JT; ++j) {
            c0[j0 + j] += t0[j];
            c1[j0 + j] += t1[j];
            c2[j0 + j] += t2[j];
            c3[j0 + j] += t3[j];
        }
    } else {
        for (int64_t j = 0; j < JT; ++j) {
            c0[j0 + j] = t0[j];
            c1[j0 + j] = t1[j];
            c2[j0 + j] = t2[j];
            c3[j0 + j] = t3[j];
        }
    }
}

template <class T>
inline void matmul_nn_rows(const T* a, const T* b, T* c, int64_t k, int64_t n, int64_t r0, int64_t r1,
                           bool acc) {
    constexpr int64_t JT = 256 / sizeof(T);
    int64_t i = r0;
    for (; i + 4 <= r1; i += 4) {
        const T* a0 = a + i * k;
        const T* a1 = a0 + k;
        const T* a2 = a1 + k;
        const T* a3 = a2 + k;
        T* c0 = c + i * n;
        T* c1 = c0 + n;
        T* c2 = c1 + n;
        T* c3 = c2 + n;
        int64_t j0 = 0;
        for (; j0 + JT <= n; j0 += JT) matmul_nn_tile(a0, a1, a2, a3, b, c0, c1, c2, c3, k, n, j0, acc);
        if (j0 < n) {
            if (!acc)
                for (int64_t j = j0; j < n; ++j) c0[j] = c1[j] = c2[j] = c3[j] = T(0);
            for (int64_t kk = 0; kk < k; ++kk) {
                const T* br = b + kk * n;
                const T w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
                for (int64_t j = j0; j < n; ++j) {
                    c0[j] += w0 * br[j];
                    c1[j] += w1 * br[j];
                    c2[j] += w2 * br[j];
                    c3[j] += w3 * br[j];
                }
            }
        }
    }
    for (; i < r1; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        if (!acc)
            for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
        for (int64_t kk = 0; kk < k; ++kk) {
            const T w = arow[kk];
            const T* br = b + kk * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += w * br[j];
        }
    }
}

// c[kk,:] (+)= sum_i a[i,kk] * b[i,:] for one kk, i ascending.
template <class T>
inline void matmul_tn_col(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, int64_t kk,
                          bool acc) {
    T* crow = c + kk * n;
    if (!acc)
        for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    for (int64_t i = 0; i < m; ++i) {
        const T aik = a[i * k + kk];
        const T* brow = b + i * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
}

// Rows [k0,k1) of c = a^T * b, register-tiled like matmul_nn_rows; the four
// broadcast weights per step are contiguous in a's row.
template <class T>
inline void matmul_tn_rows(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, int64_t k0,
                           int64_t k1, bool acc) {
    constexpr int64_t JT = 256 / sizeof(T);
    int64_t kk = k0;
    for (; kk + 4 <= k1; kk += 4) {
        T* c0 = c + kk * n;
        T* c1 = c0 + n;
        T* c2 = c1 + n;
        T* c3 = c2 + n;
        int64_t j0 = 0;
        for (; j0 + JT <= n; j0 += JT) {
            T t0[JT], t1[JT], t2[JT], t3[JT];
            for (int64_t j = 0; j < JT; ++j) t0[j] = t1[j] = t2[j] = t3[j] = T(0);
            for (int64_t i = 0; i < m; ++i) {
                const T* ar = a + i * k + kk;
                const T* br = b + i * n + j0;
                const T w0 = ar[0], w1 = ar[1], w2 = ar[2], w3 = ar[3];
                for (int64_t j = 0; j < JT; ++j) {
                    t0[j] += w0 * br[j];
                    t1[j] += w1 * br[j];
                    t2[j] += w2 * br[j];
                    t3[j] += w3 * br[j];
                }
            }
            if (acc) {
                for (int64_t j = 0; j < JT; ++j) {
                    c0[j0 + j] += t0[j];
                    c1[j0 + j] += t1[j];
                    c2[j0 + j] += t2[j];
                    c3[j0 + j] += t3[j];
                }
            } else {
                for (int64_t j = 0; j < JT; ++j) {
                    c0[j0 + j] = t0[j];
                    c1[j0 + j] = t1[j];
                    c2[j0 + j] = t2[j];
                    c3[j0 + j] = t3[j];
                }
            }
        }
        if (j0 < n) {
            if (!acc)
                for (int64_t j = j0; j < n; ++j) c0[j] = c1[j] = c2[j] = c3[j] = T(0);
            for (int64_t i = 0; i < m; ++i) {
                const T* ar = a + i * k + kk;
                const T* br = b + i * n;
                const T w0 = ar[0], w1 = ar[1], w2 = ar[2], w3 = ar[3];
                for (int64_t j = j0; j < n; ++j) {
                    c0[j] += w0 * br[j];
                    c1[j] += w1 * br[j];
                    c2[j] += w2 * br[j];
                    c3[j] += w3 * br[j];
                }
            }
        }
    }
    for (; kk < k1; ++kk) matmul_tn_col(a, b, c, m, k, n, kk, acc);
}

template <class T>
inline std::vector<T> transposed(const T* x, int64_t rows, int64_t cols) {
    std::vector<T> out(static_cast<size_t>(rows * cols));
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) out[static_cast<size_t>(j * rows + i)] = x[i * cols + j];
    return out;
}

template <class T>
inline void softmax_row(const T* x, T* y, int64_t cols, int64_t i) {
    const T* xr = x + i * cols;
    T* yr = y + i * cols;
    T mx = xr[0];
    for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;  // exponentials in native precision, sum in double
    for (int64_t j = 0; j < cols; ++j) {
        const T e = std::exp(xr[j] - mx);
        yr[j] = e;
        sum += static_cast<double>(e);
    }
    const double inv = 1.0 / sum;
    for (int64_t j = 0; j < cols; ++j) yr[j] = static_cast<T>(static_cast<double>(yr[j]) * inv);
}

// dx[i,:] (+)= y ⊙ (dy - <dy,y>)
template <class T>
inline void softmax_backward_row(const T* y, const T* dy, T* dx, int64_t cols, int64_t i, bool acc) {
    const T* yr = y + i * cols;
    const T* dyr = dy + i * cols;
    T* dxr = dx + i * cols;
    double dot = 0.0;
    for (int64_t j = 0; j < cols; ++j) dot += static_cast<double>(dyr[j]) * static_cast<double>(yr[j]);
    for (int64_t j = 0; j < cols; ++j) {
        const T v = static_cast<T>(static_cast<double>(yr[j]) * (static_cast<double>(dyr[j]) - dot));
        dxr[j] = acc ? dxr[j] + v : v;
    }
}

template <class T>
inline void layer_norm_row(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* inv_std,
                           int64_t cols, int64_t i, T eps) {
    const T* xr = x + i * cols;
    double mean = 0.0;
    for (int64_t j = 0; j < cols; ++j) mean += static_cast<double>(xr[j]);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
        const double d = static_cast<double>(xr[j]) - mean;
        var += d * d;
    }
    var /= static_cast<double>(cols);
    const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    if (inv_std) inv_std[i] = istd;
    T* yr = y + i * cols;
    T* hr = xhat ? xhat + i * cols : nullptr;
    for (int64_t j = 0; j < cols; ++j) {
        const T h = static_cast<T>((static_cast<double>(xr[j]) - mean)) * istd;
        if (hr) hr[j] = h;
        yr[j] = gamma[j] * h + beta[j];
    }
}

template <class T>
inline void layer_norm_backward_row(const T* dy, const T* gamma, const T* xhat, const T* inv_std,
                                    T* dx, int64_t cols, int64_t i, bool acc) {
    const T* dyr = dy + i * cols;
    const T* hr = xhat + i * cols;
    T* dxr = dx + i * cols;
    double m1 = 0.0, m2 = 0.0;  // mean(g·dy), mean(g·dy·xhat)
    for (int64_t j = 0; j < cols; ++j) {
        const double gd = static_cast<double>(gamma[j]) * static_cast<double>(dyr[j]);
        m1 += gd;
        m2 += gd * static_cast<double>(hr[j]);
    }
    m1 /= static_cast<double>(cols);
    m2 /= static_cast<double>(cols);
    for (int64_t j = 0; j < cols; ++j) {
        const double gd = static_cast<double>(gamma[j]) * static_cast<double>(dyr[j]);
        const double v = static_cast<double>(inv_std[i]) * (gd - m1 - static_cast<double>(hr[j]) * m2);
        dxr[j] = acc ? dxr[j] + static_cast<T>(v) : static_cast<T>(v);
    }
}

// Rational tanh for the float path (max error ~1e-7, auto-vectorizable);
// the double path keeps libm tanh so double-precision gradient checks see
// the exact function.
inline float tanh_impl(float x) {
    constexpr float bound = 7.90531110763549805f;  // rational is only valid inside
    const float c = x < -bound ? -bound : (x > bound ? bound : x);
    const float x2 = c * c;
    float p = 2.00018790482477e-13f;
    p = x2 * p + -8.60467152213735e-11f;
    p = x2 * p + 5.12229709037114e-08f;
    p = x2 * p + 1.48572235717979e-05f;
    p = x2 * p + 6.37261928875436e-04f;
    p = x2 * p + 4.89352455891786e-03f;
    p *= c;
    float q = 1.19825839466702e-06f;
    q = x2 * q + 1.18534705686654e-04f;
    q = x2 * q + 2.26843463243900e-03f;
    q = x2 * q + 4.89352518554385e-03f;
    const float t = p / q;
    return t < -1.0f ? -1.0f : (t > 1.0f ? 1.0f : t);  // fit overshoots 1 near saturation
}

inline double tanh_impl(double x) { return std::tanh(x); }

template <class T>
inline T gelu_scalar(T x) {
    const T u = T(0.7978845608028654) * (x + T(0.044715) * x * x * x);
    return T(0.5) * x * (T(1) + tanh_impl(u));
}

template <class T>
inline T gelu_grad_scalar(T x) {
    const T u = T(0.7978845608028654) * (x + T(0.044715) * x * x * x);
    const T t = tanh_impl(u);
    const T du = T(0.7978845608028654) * (T(1) + T(3) * T(0.044715) * x * x);
    return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Serial reference implementations. Kept for testing the parallel kernels
// and as the baseline in the kernel benchmark.
// ---------------------------------------------------------------------------
namespace ref {

template <class T>
void matmul_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
    detail::matmul_nn_rows(a, b, c, k, n, 0, m, acc);
}

// c = a * bT^T with bT stored [n,k]; materializes b once and reuses the
// nn kernel, so nt shares its accumulation order.
template <class T>
void matmul_nt(const T* a, const T* bT, T* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
    const std::vector<T> b = detail::transposed(bT, n, k);
    detail::matmul_nn_rows(a, b.data(), c, k, n, 0, m, acc);
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
    detail::matmul_tn_rows(a, b, c, m, k, n, 0, k, acc);
}

template <class T>
void softmax_rows(const T* x, T* y, int64_t rows, int64_t cols) {
    for (int64_t i = 0; i < rows; ++i) detail::softmax_row(x, y, cols, i);
}

template <class T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, int64_t rows, int64_t cols, bool acc = false) {
    for (int64_t i = 0; i < rows; ++i) detail::softmax_backward_row(y, dy, dx, cols, i, acc);
}

template <class T>
void layer_norm_rows(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* inv_std,
                     int64_t rows, int64_t cols, T eps) {
    for (int64_t i = 0; i < rows; ++i) detail::layer_norm_row(x, gamma, beta, y, xhat, inv_std, cols, i, eps);
}

template <class T>
void layer_norm_rows_backward(const T* dy, const T* gamma, const T* xhat, const T* inv_std,
                              T* dx, int64_t rows, int64_t cols, bool acc = false) {
    for (int64_t i = 0; i < rows; ++i) detail::layer_norm_backward_row(dy, gamma, xhat, inv_std, dx, cols, i, acc);
}

template <class T>
void gelu(const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = detail::gelu_scalar(x[i]);
}

template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, int64_t n, bool acc = false) {
    for (int64_t i = 0; i < n; ++i) {
        const T v = dy[i] * detail::gelu_grad_scalar(x[i]);
        dx[i] = acc ? dx[i] + v : v;
    }
}

// out[j] (+)= sum_i x[i,j], accumulated in double
template <class T>
void column_sums(const T* x, T* out, int64_t rows, int64_t cols, bool acc = false) {
    for (int64_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (int64_t i = 0; i < rows; ++i) s += static_cast<double>(x[i * cols + j]);
        out[j] = acc ? out[j] + static_cast<T>(s) : static_cast<T>(s);
    }
}

}  // namespace ref

// ---------------------------------------------------------------------------
// OpenMP kernels (production path).
// ---------------------------------------------------------------------------

template <class T>
void matmul_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
    if (m * k * n <= detail::kParFlops || threads() <= 1) {
        ref::matmul_nn(a, b, c, m, k, n, acc);
        return;
    }
    const int64_t chunks = (m + detail::kRowChunk - 1) / detail::kRowChunk;
#pragma omp parallel for schedule(static) num_threads(threads())
    for (int64_t ch = 0; ch < chunks; ++ch) {
        const int64_t r0 = ch * detail::kRowChunk;
        detail::matmul_nn_rows(a, b, c, k, n, r0, std::min(m, r0 + detail::kRowChunk), acc);
    }
}

template <class T>
void matmul_nt(const T* a, const T* bT, T* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
    if (m * k * n <= detail::kParFlops || threads() <= 1) {
        ref::matmul_nt(a, bT, c, m, k, n, acc);
        return;
    }
    const std::vector<T> b = detail::transposed(bT, n, k);
    matmul_nn(a, b.data(), c, m, k, n, acc);
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc = false) {
    if (m * k * n <= detail::kParFlops || threads() <= 1) {
        ref::matmul_tn(a, b, c, m, k, n, acc);
        return;
    }
    constexpr int64_t KC = 16;
    const int64_t chunks = (k + KC - 1) / KC;
#pragma omp parallel for schedule(static) num_threads(threads())
    for (int64_t ch = 0; ch < chunks; ++ch) {
        const int64_t k0 = ch * KC;
        detail::matmul_tn_rows(a, b, c, m, k, n, k0, std::min(k, k0 + KC), acc);
    }
}

template <class T>
void softmax_rows(const T* x, T* y, int64_t rows, int64_t cols) {
    const bool par = rows * cols > detail::kParFlops && threads() > 1;
#pragma omp parallel for schedule(static) num_threads(threads()) if (par)
    for (int64_t i = 0; i < rows; ++i) detail::softmax_row(x, y, cols, i);
}

template <class T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, int64_t rows, int64_t cols, bool acc = false) {
    const bool par = rows * cols > detail::kParFlops && threads() > 1;
#pragma omp parallel for schedule(static) num_threads(threads()) if (par)
    for (int64_t i = 0; i < rows; ++i) detail::softmax_backward_row(y, dy, dx, cols, i, acc);
}

template <class T>
void layer_norm_rows(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* inv_std,
                     int64_t rows, int64_t cols, T eps) {
    const bool par = rows * cols > detail::kParFlops && threads() > 1;
#pragma omp parallel for schedule(static) num_threads(threads()) if (par)
    for (int64_t i = 0; i < rows; ++i) detail::layer_norm_row(x, gamma, beta, y, xhat, inv_std, cols, i, eps);
}

template <class T>
void layer_norm_rows_backward(const T* dy, const T* gamma, const T* xhat, const T* inv_std,
                              T* dx, int64_t rows, int64_t cols, bool acc = false) {
    const bool par = rows * cols > detail::kParFlops && threads() > 1;
#pragma omp parallel for schedule(static) num_threads(threads()) if (par)
    for (int64_t i = 0; i < rows; ++i) detail::layer_norm_backward_row(dy, gamma, xhat, inv_std, dx, cols, i, acc);
}

template <class T>
void gelu(const T* x, T* y, int64_t n) {
    const bool par = n > detail::kParFlops && threads() > 1;
#pragma omp parallel for schedule(static) num_threads(threads()) if (par)
    for (int64_t i = 0; i < n; ++i) y[i] = detail::gelu_scalar(x[i]);
}

template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, int64_t n, bool acc = false) {
    const bool par = n > detail::kParFlops && threads() > 1;
#pragma omp parallel for schedule(static) num_threads(threads()) if (par)
    for (int64_t i = 0; i < n; ++i) {
        const T v = dy[i] * detail::gelu_grad_scalar(x[i]);
        dx[i] = acc ? dx[i] + v : v;
    }
}

template <class T>
void column_sums(const T* x, T* out, int64_t rows, int64_t cols, bool acc = false) {
    const bool par = rows * cols > detail::kParFlops && threads() > 1;
#pragma omp parallel for schedule(static) num_threads(threads()) if (par)
    for (int64_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (int64_t i = 0; i < rows; ++i) s += static_cast<double>(x[i * cols + j]);
        out[j] = acc ? out[j] + static_cast<T>(s) : static_cast<T>(s);
    }
}

}  // namespace vitlab::kernels
