#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "vitlab/errors.hpp"

namespace vitlab {

// Dense n-dimensional array in row-major order. Templated on the scalar so
// the same op implementations serve the float production path and the
// double path used by gradient checks.
template <class T>
struct TensorT {
    std::vector<int64_t> shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(checked_numel(shape)), T(0));
    }

    TensorT(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (checked_numel(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static TensorT zeros(std::vector<int64_t> s) { return TensorT(std::move(s)); }

    static TensorT full(std::vector<int64_t> s, T value) {
        TensorT t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    static TensorT scalar(T value) { return TensorT({1}, {value}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t rank() const { return static_cast<int64_t>(shape.size()); }

    int64_t dim(int64_t i) const {
        if (i < 0) i += rank();
        if (i < 0 || i >= rank()) throw ShapeError("dim index " + std::to_string(i) + " out of rank " + std::to_string(rank()));
        return shape[static_cast<size_t>(i)];
    }

    T& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& at(int64_t i) const { return data[static_cast<size_t>(i)]; }
    T& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * dim(1) + j)]; }
    const T& at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * dim(1) + j)]; }
    T& at(int64_t i, int64_t j, int64_t k) { return data[static_cast<size_t>((i * dim(1) + j) * dim(2) + k)]; }
    const T& at(int64_t i, int64_t j, int64_t k) const { return data[static_cast<size_t>((i * dim(1) + j) * dim(2) + k)]; }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (const T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    static int64_t checked_numel(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t e : s) {
            if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(s));
            n *= e;
        }
        return n;
    }

    static std::string shape_str(const std::vector<int64_t>& s) {
        std::string out = "[";
        for (size_t i = 0; i < s.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

    std::string shape_str() const { return shape_str(shape); }
};

using Tensor = TensorT<float>;

// Softmax over one axis of a plain tensor (no gradient); max-subtracted,
// sums accumulated in double. Works for any rank.
template <class T>
TensorT<T> softmax(const TensorT<T>& x, int64_t axis) {
    if (axis < 0) axis += x.rank();
    if (axis < 0 || axis >= x.rank())
        throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for " + x.shape_str());
    if (!x.all_finite()) throw NumericError("softmax input contains non-finite values");

    const int64_t n = x.dim(axis);
    int64_t inner = 1, outer = 1;
    for (int64_t i = 0; i < axis; ++i) outer *= x.shape[static_cast<size_t>(i)];
    for (int64_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape[static_cast<size_t>(i)];

    TensorT<T> y(x.shape);
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * n * inner + in;
            T mx = x.data[static_cast<size_t>(base)];
            for (int64_t i = 1; i < n; ++i) mx = std::max(mx, x.data[static_cast<size_t>(base + i * inner)]);
            double sum = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                const T e = static_cast<T>(std::exp(static_cast<double>(x.data[static_cast<size_t>(base + i * inner)] - mx)));
                y.data[static_cast<size_t>(base + i * inner)] = e;
                sum += static_cast<double>(e);
            }
            for (int64_t i = 0; i < n; ++i)
                y.data[static_cast<size_t>(base + i * inner)] =
                    static_cast<T>(static_cast<double>(y.data[static_cast<size_t>(base + i * inner)]) / sum);
        }
    }
    return y;
}

}  // namespace vitlab
