// Test-only oracles: central finite differences for gradient checks and
// small brute-force reference implementations. Everything here is kept
// independent of the library's backward rules.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vitlab/autodiff.hpp"
#include "vitlab/rng.hpp"
#include "vitlab/tensor.hpp"

namespace oracles {

using vitlab::SplitMix64;
using vitlab::TapeT;
using vitlab::TensorT;
using vitlab::VarT;

inline TensorT<double> random_tensor(std::vector<int64_t> shape, SplitMix64& rng, double scale = 1.0) {
    TensorT<double> t(std::move(shape));
    for (auto& v : t.data) v = scale * rng.gaussian();
    return t;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
    std::string worst;  // where the worst error occurred
};

// loss_fn must rebuild the forward pass from the current parameter values;
// it receives a tape (or nullptr for plain evaluations).
inline GradCheckResult check_gradients(const std::vector<VarT<double>*>& params,
                                       const std::function<VarT<double>(TapeT<double>*)>& loss_fn,
                                       double step = 1e-4, int max_coords_per_param = -1,
                                       uint64_t coord_seed = 17) {
    for (auto* p : params) std::fill(p->grad->data.begin(), p->grad->data.end(), 0.0);
    TapeT<double> tape;
    VarT<double> loss = loss_fn(&tape);
    tape.backward(loss);

    GradCheckResult result;
    SplitMix64 rng(coord_seed);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        VarT<double>& p = *params[pi];
        const int64_t n = p.numel();
        std::vector<int64_t> coords;
        if (max_coords_per_param < 0 || max_coords_per_param >= n) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            for (int c = 0; c < max_coords_per_param; ++c)
                coords.push_back(static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n))));
        }
        for (int64_t ci : coords) {
            // Tensors are immutable once produced, so perturbations install a
            // fresh value buffer rather than writing through shared state.
            const double saved = p.val->data[static_cast<size_t>(ci)];
            auto perturbed = [&](double v) {
                auto t = std::make_shared<TensorT<double>>(*p.val);
                t->data[static_cast<size_t>(ci)] = v;
                p.val = t;
                const VarT<double> out = loss_fn(nullptr);
                return out.val->data[0];
            };
            const double f_plus = perturbed(saved + step);
            const double f_minus = perturbed(saved - step);
            perturbed(saved);  // restore
            const double fd = (f_plus - f_minus) / (2.0 * step);
            const double analytic = p.grad->data[static_cast<size_t>(ci)];
            const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
            const double rel = std::abs(fd - analytic) / denom;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst = "param " + std::to_string(pi) + " coord " + std::to_string(ci) + " fd=" +
                               std::to_string(fd) + " analytic=" + std::to_string(analytic);
            }
            ++result.checked;
        }
    }
    return result;
}

// Plain triple-loop matrix product.
inline TensorT<double> matmul_slow(const TensorT<double>& a, const TensorT<double>& b) {
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<double> c({m, n});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int64_t kk = 0; kk < k; ++kk) s += a.at(i, kk) * b.at(kk, j);
            c.at(i, j) = s;
        }
    return c;
}

// Scalar-loop entropy of one distribution.
inline double entropy_slow(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

// Scalar-loop Brier score.
inline double brier_slow(const std::vector<std::vector<double>>& probs, const std::vector<int>& truth) {
    double total = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        double row = 0.0;
        for (size_t c = 0; c < probs[i].size(); ++c) {
            const double target = static_cast<int>(c) == truth[i] ? 1.0 : 0.0;
            const double d = probs[i][c] - target;
            row += d * d;
        }
        total += row;
    }
    return total / static_cast<double>(probs.size());
}

}  // namespace oracles
