#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vitlab/errors.hpp"
#include "vitlab/kernels.hpp"
#include "vitlab/rng.hpp"
#include "vitlab/tensor.hpp"

namespace vitlab {

// Reverse-mode autodiff over TensorT. A tape records one forward pass
// (define-by-run) and is replayed backward exactly once; tensors are
// immutable once produced and a tape is confined to a single thread.

template <class T>
class TapeT {
public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    size_t size() const { return nodes_.size(); }

    template <class V>
    void backward(V& loss) {
        if (!loss.val || loss.val->numel() != 1)
            throw ShapeError("backward requires a scalar loss, got " +
                             (loss.val ? loss.val->shape_str() : std::string("<empty>")));
        if (!loss.grad) throw InputError("loss was not produced under an active tape");
        loss.grad->data[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> nodes_;
};

template <class T>
struct VarT {
    std::shared_ptr<TensorT<T>> val;
    std::shared_ptr<TensorT<T>> grad;  // null for constants / untracked values

    const std::vector<int64_t>& shape() const { return val->shape; }
    int64_t numel() const { return val->numel(); }
    int64_t dim(int64_t i) const { return val->dim(i); }
};

using Tape = TapeT<float>;
using Var = VarT<float>;

template <class T>
VarT<T> make_param(TensorT<T> t) {
    auto v = std::make_shared<TensorT<T>>(std::move(t));
    auto g = std::make_shared<TensorT<T>>(v->shape);
    return {v, g};
}

template <class T>
VarT<T> make_const(TensorT<T> t) {
    return {std::make_shared<TensorT<T>>(std::move(t)), nullptr};
}

namespace detail {

template <class T>
std::shared_ptr<TensorT<T>> grad_slot(TapeT<T>* tape, const std::vector<int64_t>& shape) {
    return tape ? std::make_shared<TensorT<T>>(shape) : nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ops. Each takes a nullable tape: with a tape the op is recorded and the
// output gets a zeroed gradient slot; without, it is a plain evaluation.
// Backward rules accumulate (+=) so values used twice get summed gradients.
// ---------------------------------------------------------------------------

template <class T>
VarT<T> matmul(TapeT<T>* tape, const VarT<T>& a, const VarT<T>& b) {
    if (a.val->rank() != 2 || b.val->rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul dimension mismatch: " + a.val->shape_str() + " x " + b.val->shape_str());
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{m, n});
    kernels::matmul_nn(a.val->data.data(), b.val->data.data(), out->data.data(), m, k, n);
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([a, b, y, m, k, n] {
            if (a.grad)
                kernels::matmul_nt(y.grad->data.data(), b.val->data.data(), a.grad->data.data(), m, n, k, true);
            if (b.grad)
                kernels::matmul_tn(a.val->data.data(), y.grad->data.data(), b.grad->data.data(), m, k, n, true);
        });
    }
    return y;
}

template <class T>
VarT<T> add(TapeT<T>* tape, const VarT<T>& a, const VarT<T>& b) {
    if (!a.val->same_shape(*b.val))
        throw ShapeError("add shape mismatch: " + a.val->shape_str() + " vs " + b.val->shape_str());
    auto out = std::make_shared<TensorT<T>>(a.val->shape);
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out->data[i] = a.val->data[i] + b.val->data[i];
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([a, b, y, n] {
            if (a.grad)
                for (int64_t i = 0; i < n; ++i) a.grad->data[i] += y.grad->data[i];
            if (b.grad)
                for (int64_t i = 0; i < n; ++i) b.grad->data[i] += y.grad->data[i];
        });
    }
    return y;
}

// x: [m,n], bias: [n], broadcast over rows
template <class T>
VarT<T> add_bias(TapeT<T>* tape, const VarT<T>& x, const VarT<T>& bias) {
    if (x.val->rank() != 2 || bias.val->rank() != 1 || x.dim(1) != bias.dim(0))
        throw ShapeError("add_bias shape mismatch: " + x.val->shape_str() + " + " + bias.val->shape_str());
    const int64_t m = x.dim(0), n = x.dim(1);
    auto out = std::make_shared<TensorT<T>>(x.val->shape);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out->data[i * n + j] = x.val->data[i * n + j] + bias.val->data[j];
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, bias, y, m, n] {
            if (x.grad)
                for (int64_t i = 0; i < m * n; ++i) x.grad->data[i] += y.grad->data[i];
            if (bias.grad)
                kernels::column_sums(y.grad->data.data(), bias.grad->data.data(), m, n, true);
        });
    }
    return y;
}

template <class T>
VarT<T> scale(TapeT<T>* tape, const VarT<T>& x, double c) {
    auto out = std::make_shared<TensorT<T>>(x.val->shape);
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) out->data[i] = static_cast<T>(static_cast<double>(x.val->data[i]) * c);
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, y, c, n] {
            if (x.grad)
                for (int64_t i = 0; i < n; ++i)
                    x.grad->data[i] += static_cast<T>(static_cast<double>(y.grad->data[i]) * c);
        });
    }
    return y;
}

template <class T>
VarT<T> mul(TapeT<T>* tape, const VarT<T>& a, const VarT<T>& b) {
    if (!a.val->same_shape(*b.val))
        throw ShapeError("mul shape mismatch: " + a.val->shape_str() + " vs " + b.val->shape_str());
    auto out = std::make_shared<TensorT<T>>(a.val->shape);
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out->data[i] = a.val->data[i] * b.val->data[i];
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([a, b, y, n] {
            if (a.grad)
                for (int64_t i = 0; i < n; ++i) a.grad->data[i] += y.grad->data[i] * b.val->data[i];
            if (b.grad)
                for (int64_t i = 0; i < n; ++i) b.grad->data[i] += y.grad->data[i] * a.val->data[i];
        });
    }
    return y;
}

template <class T>
VarT<T> sum(TapeT<T>* tape, const VarT<T>& x) {
    double s = 0.0;
    for (const T v : x.val->data) s += static_cast<double>(v);
    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{1});
    out->data[0] = static_cast<T>(s);
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        const int64_t n = x.numel();
        tape->record([x, y, n] {
            if (x.grad) {
                const T g = y.grad->data[0];
                for (int64_t i = 0; i < n; ++i) x.grad->data[i] += g;
            }
        });
    }
    return y;
}

template <class T>
VarT<T> transpose(TapeT<T>* tape, const VarT<T>& x) {
    if (x.val->rank() != 2) throw ShapeError("transpose requires rank-2, got " + x.val->shape_str());
    const int64_t m = x.dim(0), n = x.dim(1);
    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{n, m});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out->data[j * m + i] = x.val->data[i * n + j];
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, y, m, n] {
            if (x.grad)
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) x.grad->data[i * n + j] += y.grad->data[j * m + i];
        });
    }
    return y;
}

// Row-wise softmax with max subtraction. axis selects the reduction axis of
// a rank-2 input (axis 0 handled via transposition); rank-1 is one row.
template <class T>
VarT<T> softmax_op(TapeT<T>* tape, const VarT<T>& x, int64_t axis = -1) {
    if (!x.val->all_finite()) throw NumericError("softmax input contains non-finite values");
    if (x.val->rank() == 1) {
        if (axis != 0 && axis != -1)
            throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for " + x.val->shape_str());
        axis = -1;
    } else if (x.val->rank() == 2) {
        if (axis < 0) axis += 2;
        if (axis == 0) {
            VarT<T> xt = transpose(tape, x);
            VarT<T> st = softmax_op(tape, xt, -1);
            return transpose(tape, st);
        }
        if (axis != 1) throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for " + x.val->shape_str());
    } else {
        throw ShapeError("softmax op supports rank 1 or 2, got " + x.val->shape_str());
    }
    const int64_t rows = x.val->rank() == 2 ? x.dim(0) : 1;
    const int64_t cols = x.val->rank() == 2 ? x.dim(1) : x.dim(0);
    auto out = std::make_shared<TensorT<T>>(x.val->shape);
    kernels::softmax_rows(x.val->data.data(), out->data.data(), rows, cols);
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, y, rows, cols] {
            if (x.grad)
                kernels::softmax_rows_backward(y.val->data.data(), y.grad->data.data(), x.grad->data.data(),
                                               rows, cols, true);
        });
    }
    return y;
}

// Per-row normalization over the last dimension, then affine by gamma/beta.
template <class T>
VarT<T> layer_norm(TapeT<T>* tape, const VarT<T>& x, const VarT<T>& gamma, const VarT<T>& beta, T eps = T(1e-5)) {
    if (x.val->rank() != 2) throw ShapeError("layer_norm requires rank-2 input, got " + x.val->shape_str());
    const int64_t rows = x.dim(0), cols = x.dim(1);
    if (gamma.val->rank() != 1 || gamma.dim(0) != cols || beta.val->rank() != 1 || beta.dim(0) != cols)
        throw ShapeError("layer_norm affine shapes " + gamma.val->shape_str() + "/" + beta.val->shape_str() +
                         " do not match last dim of " + x.val->shape_str());
    auto out = std::make_shared<TensorT<T>>(x.val->shape);
    auto xhat = std::make_shared<TensorT<T>>(x.val->shape);
    auto inv_std = std::make_shared<TensorT<T>>(std::vector<int64_t>{rows});
    kernels::layer_norm_rows(x.val->data.data(), gamma.val->data.data(), beta.val->data.data(),
                             out->data.data(), xhat->data.data(), inv_std->data.data(), rows, cols, eps);
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, gamma, beta, y, xhat, inv_std, rows, cols] {
            if (gamma.grad) {
                // dgamma[j] = sum_i dy[i,j] * xhat[i,j]
                for (int64_t j = 0; j < cols; ++j) {
                    double s = 0.0;
                    for (int64_t i = 0; i < rows; ++i)
                        s += static_cast<double>(y.grad->data[i * cols + j]) * static_cast<double>(xhat->data[i * cols + j]);
                    gamma.grad->data[j] += static_cast<T>(s);
                }
            }
            if (beta.grad) kernels::column_sums(y.grad->data.data(), beta.grad->data.data(), rows, cols, true);
            if (x.grad)
                kernels::layer_norm_rows_backward(y.grad->data.data(), gamma.val->data.data(), xhat->data.data(),
                                                  inv_std->data.data(), x.grad->data.data(), rows, cols, true);
        });
    }
    return y;
}

template <class T>
VarT<T> gelu(TapeT<T>* tape, const VarT<T>& x) {
    auto out = std::make_shared<TensorT<T>>(x.val->shape);
    const int64_t n = x.numel();
    kernels::gelu(x.val->data.data(), out->data.data(), n);
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, y, n] {
            if (x.grad)
                kernels::gelu_backward(x.val->data.data(), y.grad->data.data(), x.grad->data.data(), n, true);
        });
    }
    return y;
}

template <class T>
VarT<T> slice_cols(TapeT<T>* tape, const VarT<T>& x, int64_t c0, int64_t c1) {
    if (x.val->rank() != 2 || c0 < 0 || c1 > x.dim(1) || c0 >= c1)
        throw ShapeError("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) + ") invalid for " +
                         x.val->shape_str());
    const int64_t m = x.dim(0), n = x.dim(1), w = c1 - c0;
    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{m, w});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < w; ++j) out->data[i * w + j] = x.val->data[i * n + c0 + j];
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, y, m, n, w, c0] {
            if (x.grad)
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < w; ++j) x.grad->data[i * n + c0 + j] += y.grad->data[i * w + j];
        });
    }
    return y;
}

template <class T>
VarT<T> concat_cols(TapeT<T>* tape, const std::vector<VarT<T>>& parts) {
    if (parts.empty()) throw InputError("concat_cols requires at least one part");
    const int64_t m = parts[0].dim(0);
    int64_t n = 0;
    for (const auto& p : parts) {
        if (p.val->rank() != 2 || p.dim(0) != m)
            throw ShapeError("concat_cols row mismatch: " + p.val->shape_str());
        n += p.dim(1);
    }
    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{m, n});
    int64_t off = 0;
    for (const auto& p : parts) {
        const int64_t w = p.dim(1);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j) out->data[i * n + off + j] = p.val->data[i * w + j];
        off += w;
    }
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        auto ps = parts;
        tape->record([ps, y, m, n] {
            int64_t off = 0;
            for (const auto& p : ps) {
                const int64_t w = p.val->dim(1);
                if (p.grad)
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t j = 0; j < w; ++j) p.grad->data[i * w + j] += y.grad->data[i * n + off + j];
                off += w;
            }
        });
    }
    return y;
}

template <class T>
VarT<T> slice_rows(TapeT<T>* tape, const VarT<T>& x, int64_t r0, int64_t r1) {
    if (x.val->rank() != 2 || r0 < 0 || r1 > x.dim(0) || r0 >= r1)
        throw ShapeError("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) + ") invalid for " +
                         x.val->shape_str());
    const int64_t n = x.dim(1), h = r1 - r0;
    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{h, n});
    std::copy_n(x.val->data.begin() + r0 * n, h * n, out->data.begin());
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, y, r0, n, h] {
            if (x.grad)
                for (int64_t i = 0; i < h * n; ++i) x.grad->data[r0 * n + i] += y.grad->data[i];
        });
    }
    return y;
}

// Gathers rows offset, offset+stride, ... (the class-token rows of a
// block-packed batch sequence).
template <class T>
VarT<T> take_rows_strided(TapeT<T>* tape, const VarT<T>& x, int64_t offset, int64_t stride, int64_t count) {
    if (x.val->rank() != 2 || offset < 0 || stride <= 0 || offset + (count - 1) * stride >= x.dim(0))
        throw ShapeError("take_rows_strided out of range for " + x.val->shape_str());
    const int64_t n = x.dim(1);
    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{count, n});
    for (int64_t i = 0; i < count; ++i)
        std::copy_n(x.val->data.begin() + (offset + i * stride) * n, n, out->data.begin() + i * n);
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, y, offset, stride, count, n] {
            if (x.grad)
                for (int64_t i = 0; i < count; ++i)
                    for (int64_t j = 0; j < n; ++j)
                        x.grad->data[(offset + i * stride) * n + j] += y.grad->data[i * n + j];
        });
    }
    return y;
}

// x holds B blocks of rows_per_block rows; adds p (one block) to every block.
template <class T>
VarT<T> add_per_block(TapeT<T>* tape, const VarT<T>& x, const VarT<T>& p, int64_t blocks) {
    const int64_t rows_per_block = p.dim(0), n = p.dim(1);
    if (x.val->rank() != 2 || x.dim(0) != blocks * rows_per_block || x.dim(1) != n)
        throw ShapeError("add_per_block shapes " + x.val->shape_str() + " / " + p.val->shape_str() +
                         " with " + std::to_string(blocks) + " blocks");
    auto out = std::make_shared<TensorT<T>>(x.val->shape);
    for (int64_t b = 0; b < blocks; ++b)
        for (int64_t i = 0; i < rows_per_block * n; ++i)
            out->data[b * rows_per_block * n + i] = x.val->data[b * rows_per_block * n + i] + p.val->data[i];
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, p, y, blocks, rows_per_block, n] {
            if (x.grad)
                for (int64_t i = 0; i < blocks * rows_per_block * n; ++i) x.grad->data[i] += y.grad->data[i];
            if (p.grad)
                for (int64_t b = 0; b < blocks; ++b)
                    for (int64_t i = 0; i < rows_per_block * n; ++i)
                        p.grad->data[i] += y.grad->data[b * rows_per_block * n + i];
        });
    }
    return y;
}

// Builds B blocks of (1 + tokens_per_block) rows: row 0 of each block is the
// single row of cls, the rest are that block's rows of tokens.
template <class T>
VarT<T> prepend_row_per_block(TapeT<T>* tape, const VarT<T>& tokens, const VarT<T>& cls, int64_t blocks) {
    if (cls.val->rank() != 2 || cls.dim(0) != 1 || tokens.val->rank() != 2 || cls.dim(1) != tokens.dim(1) ||
        tokens.dim(0) % blocks != 0)
        throw ShapeError("prepend_row_per_block shapes " + tokens.val->shape_str() + " / " + cls.val->shape_str());
    const int64_t n = tokens.dim(1);
    const int64_t tpb = tokens.dim(0) / blocks;
    const int64_t seq = tpb + 1;
    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{blocks * seq, n});
    for (int64_t b = 0; b < blocks; ++b) {
        std::copy_n(cls.val->data.begin(), n, out->data.begin() + b * seq * n);
        std::copy_n(tokens.val->data.begin() + b * tpb * n, tpb * n, out->data.begin() + (b * seq + 1) * n);
    }
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([tokens, cls, y, blocks, tpb, seq, n] {
            for (int64_t b = 0; b < blocks; ++b) {
                if (cls.grad)
                    for (int64_t j = 0; j < n; ++j) cls.grad->data[j] += y.grad->data[b * seq * n + j];
                if (tokens.grad)
                    for (int64_t i = 0; i < tpb * n; ++i)
                        tokens.grad->data[b * tpb * n + i] += y.grad->data[(b * seq + 1) * n + i];
            }
        });
    }
    return y;
}

// Inverted dropout; mask is drawn once in forward order and reused in
// backward. No-op when p == 0.
template <class T>
VarT<T> dropout(TapeT<T>* tape, const VarT<T>& x, double p, SplitMix64& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw InputError("dropout probability must be < 1");
    const int64_t n = x.numel();
    auto mask = std::make_shared<TensorT<T>>(x.val->shape);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (int64_t i = 0; i < n; ++i) mask->data[i] = rng.uniform() >= p ? keep_scale : T(0);
    auto out = std::make_shared<TensorT<T>>(x.val->shape);
    for (int64_t i = 0; i < n; ++i) out->data[i] = x.val->data[i] * mask->data[i];
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([x, y, mask, n] {
            if (x.grad)
                for (int64_t i = 0; i < n; ++i) x.grad->data[i] += y.grad->data[i] * mask->data[i];
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// Fused scaled dot-product attention over a block-packed batch.
// q,k,v: [B*T, E] with E = H*dk; per block b and head h computes
// softmax(q_bh k_bh^T / sqrt(dk)) v_bh and packs head outputs back into
// [B*T, E]. Returns the output plus the attention weights [B,H,T,T].
// ---------------------------------------------------------------------------
template <class T>
struct MhaCoreResult {
    VarT<T> out;
    std::shared_ptr<TensorT<T>> attention;  // [B,H,T,T]
};

template <class T>
MhaCoreResult<T> mha_core(TapeT<T>* tape, const VarT<T>& q, const VarT<T>& k, const VarT<T>& v,
                          int64_t batch, int64_t seq, int64_t heads) {
    if (!q.val->same_shape(*k.val) || !q.val->same_shape(*v.val) || q.val->rank() != 2)
        throw ShapeError("attention inputs must share shape: " + q.val->shape_str() + ", " +
                         k.val->shape_str() + ", " + v.val->shape_str());
    const int64_t embed = q.dim(1);
    if (q.dim(0) != batch * seq || embed % heads != 0)
        throw ShapeError("attention geometry mismatch for " + q.val->shape_str());
    const int64_t dk = embed / heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    auto out = std::make_shared<TensorT<T>>(q.val->shape);
    auto attn = std::make_shared<TensorT<T>>(std::vector<int64_t>{batch, heads, seq, seq});

    const T* qd = q.val->data.data();
    const T* kd = k.val->data.data();
    const T* vd = v.val->data.data();
    T* od = out->data.data();
    T* ad = attn->data.data();

    const int64_t nblocks = batch * heads;
    const bool par = nblocks > 1 && kernels::threads() > 1 && seq * seq * dk > (1 << 12);
#pragma omp parallel for schedule(static) num_threads(kernels::threads()) if (par)
    for (int64_t bh = 0; bh < nblocks; ++bh) {
        const int64_t b = bh / heads, h = bh % heads;
        std::vector<T> qb(seq * dk), kb(seq * dk), vb(seq * dk), scores(seq * seq);
        for (int64_t t = 0; t < seq; ++t)
            for (int64_t j = 0; j < dk; ++j) {
                qb[t * dk + j] = qd[(b * seq + t) * embed + h * dk + j];
                kb[t * dk + j] = kd[(b * seq + t) * embed + h * dk + j];
                vb[t * dk + j] = vd[(b * seq + t) * embed + h * dk + j];
            }
        kernels::ref::matmul_nt(qb.data(), kb.data(), scores.data(), seq, dk, seq);
        for (auto& s : scores) s = static_cast<T>(static_cast<double>(s) * inv_sqrt_dk);
        T* ab = ad + bh * seq * seq;
        kernels::ref::softmax_rows(scores.data(), ab, seq, seq);
        std::vector<T> ob(seq * dk);
        kernels::ref::matmul_nn(ab, vb.data(), ob.data(), seq, seq, dk);
        for (int64_t t = 0; t < seq; ++t)
            for (int64_t j = 0; j < dk; ++j) od[(b * seq + t) * embed + h * dk + j] = ob[t * dk + j];
    }

    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        tape->record([q, k, v, y, attn, batch, seq, heads, embed, dk, inv_sqrt_dk, par] {
            const T* qd = q.val->data.data();
            const T* kd = k.val->data.data();
            const T* vd = v.val->data.data();
            const T* ad = attn->data.data();
            const T* gd = y.grad->data.data();
            const int64_t nblocks = batch * heads;
#pragma omp parallel for schedule(static) num_threads(kernels::threads()) if (par)
            for (int64_t bh = 0; bh < nblocks; ++bh) {
                const int64_t b = bh / heads, h = bh % heads;
                std::vector<T> qb(seq * dk), kb(seq * dk), vb(seq * dk), gb(seq * dk);
                for (int64_t t = 0; t < seq; ++t)
                    for (int64_t j = 0; j < dk; ++j) {
                        qb[t * dk + j] = qd[(b * seq + t) * embed + h * dk + j];
                        kb[t * dk + j] = kd[(b * seq + t) * embed + h * dk + j];
                        vb[t * dk + j] = vd[(b * seq + t) * embed + h * dk + j];
                        gb[t * dk + j] = gd[(b * seq + t) * embed + h * dk + j];
                    }
                const T* ab = ad + bh * seq * seq;
                // dA = dO V^T ; dV = A^T dO ; dS = softmax_bwd(A, dA) * scale
                std::vector<T> dA(seq * seq), dV(seq * dk), dS(seq * seq), dQ(seq * dk), dK(seq * dk);
                kernels::ref::matmul_nt(gb.data(), vb.data(), dA.data(), seq, dk, seq);
                kernels::ref::matmul_tn(ab, gb.data(), dV.data(), seq, seq, dk);
                kernels::ref::softmax_rows_backward(ab, dA.data(), dS.data(), seq, seq);
                for (auto& s : dS) s = static_cast<T>(static_cast<double>(s) * inv_sqrt_dk);
                kernels::ref::matmul_nn(dS.data(), kb.data(), dQ.data(), seq, seq, dk);
                kernels::ref::matmul_tn(dS.data(), qb.data(), dK.data(), seq, seq, dk);
                for (int64_t t = 0; t < seq; ++t)
                    for (int64_t j = 0; j < dk; ++j) {
                        const int64_t idx = (b * seq + t) * embed + h * dk + j;
                        if (q.grad) q.grad->data[idx] += dQ[t * dk + j];
                        if (k.grad) k.grad->data[idx] += dK[t * dk + j];
                        if (v.grad) v.grad->data[idx] += dV[t * dk + j];
                    }
            }
        });
    }
    return {y, attn};
}

// ---------------------------------------------------------------------------
// Cross-entropy against label-smoothed targets: (1-eps) on the labeled
// class, eps/(C-1) elsewhere; mean over the batch. eps may vary per sample.
// ---------------------------------------------------------------------------
template <class T>
VarT<T> cross_entropy_smoothed(TapeT<T>* tape, const VarT<T>& logits, const std::vector<int>& targets,
                               const std::vector<double>& eps_per_sample) {
    if (logits.val->rank() != 2) throw ShapeError("cross_entropy expects [batch, classes] logits, got " + logits.val->shape_str());
    const int64_t B = logits.dim(0), C = logits.dim(1);
    if (B < 1 || static_cast<int64_t>(targets.size()) != B || eps_per_sample.size() != targets.size())
        throw InputError("cross_entropy batch size mismatch");
    for (int64_t i = 0; i < B; ++i) {
        if (targets[i] < 0 || targets[i] >= C)
            throw IndexError("target " + std::to_string(targets[i]) + " out of range [0," + std::to_string(C) + ")");
        if (eps_per_sample[i] < 0.0 || eps_per_sample[i] >= 1.0)
            throw InputError("label smoothing must lie in [0,1)");
    }

    auto probs = std::make_shared<TensorT<T>>(logits.val->shape);
    double loss = 0.0;
    for (int64_t i = 0; i < B; ++i) {
        const T* row = logits.val->data.data() + i * C;
        double mx = static_cast<double>(row[0]);
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
        double sum = 0.0;
        for (int64_t c = 0; c < C; ++c) sum += std::exp(static_cast<double>(row[c]) - mx);
        const double lse = mx + std::log(sum);
        const double eps = eps_per_sample[i];
        const double off = C > 1 ? eps / static_cast<double>(C - 1) : 0.0;
        for (int64_t c = 0; c < C; ++c) {
            const double lp = static_cast<double>(row[c]) - lse;
            probs->data[i * C + c] = static_cast<T>(std::exp(lp));
            const double t = (c == targets[i]) ? 1.0 - eps : off;
            loss -= t * lp;
        }
    }
    loss /= static_cast<double>(B);

    auto out = std::make_shared<TensorT<T>>(std::vector<int64_t>{1});
    out->data[0] = static_cast<T>(loss);
    VarT<T> y{out, detail::grad_slot(tape, out->shape)};
    if (tape) {
        auto tgts = targets;
        auto eps_v = eps_per_sample;
        tape->record([logits, y, probs, tgts, eps_v, B, C] {
            if (!logits.grad) return;
            const double g = static_cast<double>(y.grad->data[0]) / static_cast<double>(B);
            for (int64_t i = 0; i < B; ++i) {
                const double eps = eps_v[i];
                const double off = C > 1 ? eps / static_cast<double>(C - 1) : 0.0;
                for (int64_t c = 0; c < C; ++c) {
                    const double t = (c == tgts[i]) ? 1.0 - eps : off;
                    logits.grad->data[i * C + c] +=
                        static_cast<T>((static_cast<double>(probs->data[i * C + c]) - t) * g);
                }
            }
        });
    }
    return y;
}

template <class T>
VarT<T> cross_entropy_smoothed(TapeT<T>* tape, const VarT<T>& logits, const std::vector<int>& targets,
                               double eps) {
    return cross_entropy_smoothed(tape, logits, targets, std::vector<double>(targets.size(), eps));
}

}  // namespace vitlab
