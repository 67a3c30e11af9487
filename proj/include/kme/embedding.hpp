#ifndef KME_EMBEDDING_HPP
#define KME_EMBEDDING_HPP
#pragma once

// Kernel mean embeddings: a weighted sample bound to a kernel, standing for
// mu = sum_i w_i k(x_i, .) in the RKHS of k.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "format.hpp"
#include "kernels.hpp"
#include "point_map.hpp"
#include "sampling.hpp"

namespace kme {

class Embedding {
public:
    Embedding(Kernel kernel, WeightedSample expansion) : kernel_(std::move(kernel)), expansion_(std::move(expansion)) {
        if (kernel_.dim() != expansion_.dim()) {
            throw ValidationError("Embedding: kernel dimension " + std::to_string(kernel_.dim()) +
                                  " does not match expansion dimension " + std::to_string(expansion_.dim()));
        }
    }

    const Kernel& kernel() const noexcept { return kernel_; }
    const WeightedSample& expansion() const noexcept { return expansion_; }
    std::size_t size() const noexcept { return expansion_.size(); }
    std::size_t dim() const noexcept { return expansion_.dim(); }

private:
    Kernel kernel_;
    WeightedSample expansion_;
};

namespace diagnostics {

/// Number of squared distances that came out slightly negative and were clamped to 0.
inline std::atomic<std::uint64_t>& clamped_distances() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

} // namespace diagnostics

namespace detail {

inline constexpr Eigen::Index kGramBlockRows = 128;

inline void require_same_kernel(const Embedding& a, const Embedding& b, const char* op) {
    if (!(a.kernel() == b.kernel())) {
        throw ValidationError(std::string(op) + ": kernel mismatch (" + a.kernel().describe() + " vs " +
                              b.kernel().describe() + ")");
    }
}

/// w_a^T K(A, B) w_b, evaluated in row blocks so the full Gram matrix is
/// never held. Summation order is fixed: blocks in order, rows in order.
inline double bilinear(const Kernel& k, const WeightedSample& a, const WeightedSample& b) {
    if (a.empty() || b.empty()) return 0.0;
    const bool same = &a == &b;
    Eigen::Map<const Eigen::VectorXd> wb(b.weights().data(), static_cast<Eigen::Index>(b.size()));
    const auto n = static_cast<Eigen::Index>(a.size());
    const std::size_t d = a.dim();
    double total = 0.0;
    for (Eigen::Index start = 0; start < n; start += kGramBlockRows) {
        const Eigen::Index rows = std::min(kGramBlockRows, n - start);
        PointsView block{std::span<const double>(a.coords()).subspan(static_cast<std::size_t>(start) * d,
                                                                     static_cast<std::size_t>(rows) * d),
                         d};
        const Eigen::MatrixXd g = detail::gram_impl(k, block, b.points(), same && rows == n);
        const Eigen::VectorXd gw = g * wb;
        for (Eigen::Index i = 0; i < rows; ++i) total += a.weight(static_cast<std::size_t>(start + i)) * gw(i);
    }
    return total;
}

} // namespace detail

/// <mu_a, mu_b> = w_a^T G w_b.
inline double inner(const Embedding& a, const Embedding& b) {
    detail::require_same_kernel(a, b, "inner");
    return detail::bilinear(a.kernel(), a.expansion(), b.expansion());
}

inline double rkhs_norm2(const Embedding& e) { return detail::bilinear(e.kernel(), e.expansion(), e.expansion()); }

inline double rkhs_norm(const Embedding& e) { return std::sqrt(std::max(0.0, rkhs_norm2(e))); }

/// Combines <a,a> - 2<a,b> + <b,b>; round-off below zero is clamped, a
/// clearly negative value (a non-PSD kernel) raises DiagnosticsError.
inline double combine_dist2(double aa, double ab, double bb) {
    const double d2 = aa - 2.0 * ab + bb;
    if (d2 >= 0.0) return d2;
    const double tol = 1e-8 * std::max(1.0, std::abs(aa) + std::abs(bb));
    if (d2 < -tol) {
        throw DiagnosticsError("rkhs_dist2: squared distance " + format_double(d2) +
                               " is negative beyond round-off; kernel is not positive semidefinite");
    }
    diagnostics::clamped_distances().fetch_add(1, std::memory_order_relaxed);
    return 0.0;
}

/// ||mu_a - mu_b||^2 in the RKHS of the shared kernel.
inline double rkhs_dist2(const Embedding& a, const Embedding& b) {
    detail::require_same_kernel(a, b, "rkhs_dist2");
    const double aa = rkhs_norm2(a);
    const double bb = rkhs_norm2(b);
    const double ab = detail::bilinear(a.kernel(), a.expansion(), b.expansion());
    return combine_dist2(aa, ab, bb);
}

inline double rkhs_dist(const Embedding& a, const Embedding& b) { return std::sqrt(rkhs_dist2(a, b)); }

/// sum_i w_i kz(f(x_i), .): the expansion of f(X) under kz.
inline Embedding pushforward(const Embedding& e, const PointMap& f, const Kernel& kz) {
    if (kz.dim() != f.out_dim()) {
        throw ValidationError("pushforward: output kernel dimension " + std::to_string(kz.dim()) +
                              " does not match map output dimension " + std::to_string(f.out_dim()));
    }
    return Embedding(kz, apply_fn(f, e.expansion()));
}

/// Kernel on the input space: k(x1, x2) = kz(f(x1), f(x2)).
inline Kernel pullback_kernel(const Kernel& kz, const PointMap& f, std::size_t d_in) {
    if (f.in_dim() != d_in) {
        throw ValidationError("pullback_kernel: map input dimension " + std::to_string(f.in_dim()) +
                              " differs from requested " + std::to_string(d_in));
    }
    return Kernel::pullback(kz, f);
}

/// Joint embedding of independent X, Y under the product kernel; expansion
/// points (x_i, y_j) with weights w_i u_j, i outer and j inner.
inline Embedding tensor_product(const Embedding& ex, const Embedding& ey) {
    const auto& xs = ex.expansion();
    const auto& ys = ey.expansion();
    const std::size_t d1 = xs.dim();
    const std::size_t d2 = ys.dim();
    std::vector<double> coords;
    std::vector<double> weights;
    coords.reserve(xs.size() * ys.size() * (d1 + d2));
    weights.reserve(xs.size() * ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto xi = xs.point(i);
        for (std::size_t j = 0; j < ys.size(); ++j) {
            const auto yj = ys.point(j);
            coords.insert(coords.end(), xi.begin(), xi.end());
            coords.insert(coords.end(), yj.begin(), yj.end());
            weights.push_back(xs.weight(i) * ys.weight(j));
        }
    }
    return Embedding(product_kernel(ex.kernel(), ey.kernel()),
                     WeightedSample(d1 + d2, std::move(coords), std::move(weights)));
}

} // namespace kme

#endif // KME_EMBEDDING_HPP
