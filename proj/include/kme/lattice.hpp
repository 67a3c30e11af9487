#ifndef KME_LATTICE_HPP
#define KME_LATTICE_HPP
#pragma once

// One-dimensional expansions compressed onto a uniform lattice t_k = k h.
//
// Each point mass (z, w) is spread over the `order` nearest lattice nodes
// with Lagrange interpolation weights, so sum_k W_k g(t_k) reproduces
// sum_a w_a g(z_a) for polynomials g of degree < order. Inner products of
// two lattice expansions under a smooth translation-invariant kernel then
// equal the original ones up to the tensor interpolation error of the
// kernel, O((h / sigma)^order). This is what lets the experiment harness
// evaluate RKHS distances of U-statistic expansions with N^2 points without
// materializing them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "embedding.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "sampling.hpp"

namespace kme {

class LatticeExpansion {
public:
    static constexpr unsigned kMaxOrder = 16;

    explicit LatticeExpansion(double spacing, unsigned order = 6) : h_(spacing), order_(order) {
        if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("LatticeExpansion: spacing must be > 0");
        if (order < 1 || order > kMaxOrder) throw ValidationError("LatticeExpansion: order must be in [1, 16]");
        denom_.resize(order_);
        for (unsigned j = 0; j < order_; ++j) {
            double d = 1.0;
            for (unsigned m = 0; m < order_; ++m) {
                if (m != j) d *= static_cast<double>(static_cast<int>(j) - static_cast<int>(m));
            }
            denom_[j] = 1.0 / d;
        }
    }

    double spacing() const noexcept { return h_; }
    unsigned order() const noexcept { return order_; }

    void add(double z, double w) {
        if (!std::isfinite(z) || !std::isfinite(w)) throw ValidationError("LatticeExpansion: non-finite point or weight");
        const double u = z / h_;
        const double fl = std::floor(u);
        if (std::abs(fl) > 1e15) throw ValidationError("LatticeExpansion: point outside representable lattice range");
        const auto base = static_cast<std::int64_t>(fl) - static_cast<std::int64_t>((order_ - 1) / 2);
        const double t = u - static_cast<double>(base);
        ensure(base, base + static_cast<std::int64_t>(order_) - 1);
        double left[kMaxOrder];
        double right[kMaxOrder];
        left[0] = 1.0;
        for (unsigned j = 1; j < order_; ++j) left[j] = left[j - 1] * (t - static_cast<double>(j - 1));
        right[order_ - 1] = 1.0;
        for (unsigned j = order_ - 1; j > 0; --j) right[j - 1] = right[j] * (t - static_cast<double>(j));
        double* dst = mass_.data() + (base - offset_);
        for (unsigned j = 0; j < order_; ++j) dst[j] += w * left[j] * right[j] * denom_[j];
    }

    void add(const WeightedSample& s) {
        if (s.dim() != 1) throw ValidationError("LatticeExpansion: only one-dimensional samples are supported");
        for (std::size_t i = 0; i < s.size(); ++i) add(s.coords()[i], s.weight(i));
    }

    /// Lattice index of mass()[0].
    std::int64_t offset() const noexcept { return offset_; }
    const std::vector<double>& mass() const noexcept { return mass_; }
    bool empty() const noexcept { return mass_.empty(); }

    /// Nonzero nodes as an ordinary expansion.
    WeightedSample to_sample() const {
        std::vector<double> xs, ws;
        for (std::size_t i = 0; i < mass_.size(); ++i) {
            if (mass_[i] != 0.0) {
                xs.push_back(static_cast<double>(offset_ + static_cast<std::int64_t>(i)) * h_);
                ws.push_back(mass_[i]);
            }
        }
        return WeightedSample(1, std::move(xs), std::move(ws));
    }

private:
    void ensure(std::int64_t lo, std::int64_t hi) {
        if (mass_.empty()) {
            const std::int64_t pad = 64;
            offset_ = lo - pad;
            mass_.assign(static_cast<std::size_t>(hi - lo + 1 + 2 * pad), 0.0);
            return;
        }
        const std::int64_t cur_hi = offset_ + static_cast<std::int64_t>(mass_.size()) - 1;
        if (lo >= offset_ && hi <= cur_hi) return;
        const std::int64_t slack = static_cast<std::int64_t>(mass_.size() / 2) + 64;
        const std::int64_t new_lo = lo < offset_ ? lo - slack : offset_;
        const std::int64_t new_hi = hi > cur_hi ? hi + slack : cur_hi;
        std::vector<double> grown(static_cast<std::size_t>(new_hi - new_lo + 1), 0.0);
        std::copy(mass_.begin(), mass_.end(), grown.begin() + (offset_ - new_lo));
        mass_ = std::move(grown);
        offset_ = new_lo;
    }

    double h_;
    unsigned order_;
    std::vector<double> denom_;
    std::int64_t offset_ = 0;
    std::vector<double> mass_;
};

namespace detail {

inline void require_lattice_kernel(const Kernel& k, const char* op) {
    if (k.dim() != 1 || !k.constant_diagonal()) {
        throw ValidationError(std::string(op) + ": needs a one-dimensional translation-invariant kernel, got " +
                              k.describe());
    }
}

inline void require_same_lattice(const LatticeExpansion& a, const LatticeExpansion& b) {
    if (a.spacing() != b.spacing()) throw ValidationError("lattice expansions use different spacings");
}

/// c[m] = k(0, m h) until the kernel underflows to exactly 0.
inline std::vector<double> toeplitz_column(const Kernel& k, double h, std::size_t max_len) {
    std::vector<double> c;
    const double zero = 0.0;
    for (std::size_t m = 0; m < max_len; ++m) {
        const double t = static_cast<double>(m) * h;
        const double v = k.eval_unchecked(std::span<const double>(&zero, 1), std::span<const double>(&t, 1));
        if (v == 0.0) break;
        c.push_back(v);
    }
    return c;
}

inline double toeplitz_form(const std::vector<double>& x, std::int64_t xo, const std::vector<double>& y,
                            std::int64_t yo, const std::vector<double>& c) {
    const auto band = static_cast<std::int64_t>(c.size());
    double total = 0.0;
    const auto ny = static_cast<std::int64_t>(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) continue;
        const std::int64_t gi = xo + static_cast<std::int64_t>(i);
        const std::int64_t jlo = std::max<std::int64_t>(0, gi - band + 1 - yo);
        const std::int64_t jhi = std::min<std::int64_t>(ny - 1, gi + band - 1 - yo);
        double row = 0.0;
        for (std::int64_t j = jlo; j <= jhi; ++j) {
            const std::int64_t lag = gi - (yo + j);
            row += c[static_cast<std::size_t>(lag < 0 ? -lag : lag)] * y[static_cast<std::size_t>(j)];
        }
        total += x[i] * row;
    }
    return total;
}

} // namespace detail

/// <a, b> under kernel k evaluated on the lattice nodes.
inline double lattice_inner(const LatticeExpansion& a, const LatticeExpansion& b, const Kernel& k) {
    detail::require_lattice_kernel(k, "lattice_inner");
    detail::require_same_lattice(a, b);
    if (a.empty() || b.empty()) return 0.0;
    const std::size_t span = a.mass().size() + b.mass().size() +
                             static_cast<std::size_t>(std::abs(a.offset() - b.offset()));
    const auto c = detail::toeplitz_column(k, a.spacing(), span);
    return detail::toeplitz_form(a.mass(), a.offset(), b.mass(), b.offset(), c);
}

/// ||a - b||^2 from the mass difference on the lattice, without the
/// cancellation of <a,a> - 2<a,b> + <b,b>.
inline double lattice_dist2(const LatticeExpansion& a, const LatticeExpansion& b, const Kernel& k) {
    detail::require_lattice_kernel(k, "lattice_dist2");
    detail::require_same_lattice(a, b);
    if (a.empty() && b.empty()) return 0.0;
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    for (const auto* e : {&a, &b}) {
        if (e->empty()) continue;
        lo = std::min(lo, e->offset());
        hi = std::max(hi, e->offset() + static_cast<std::int64_t>(e->mass().size()) - 1);
    }
    std::vector<double> diff(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (std::size_t i = 0; i < a.mass().size(); ++i) diff[static_cast<std::size_t>(a.offset() - lo) + i] += a.mass()[i];
    for (std::size_t i = 0; i < b.mass().size(); ++i) diff[static_cast<std::size_t>(b.offset() - lo) + i] -= b.mass()[i];
    const auto c = detail::toeplitz_column(k, a.spacing(), diff.size());
    const double d2 = detail::toeplitz_form(diff, lo, diff, lo, c);
    if (d2 >= 0.0) return d2;
    const double scale = lattice_inner(a, a, k) + lattice_inner(b, b, k);
    if (d2 < -1e-8 * std::max(1.0, scale)) {
        throw DiagnosticsError("lattice_dist2: squared distance " + format_double(d2) + " is negative beyond round-off");
    }
    diagnostics::clamped_distances().fetch_add(1, std::memory_order_relaxed);
    return 0.0;
}

} // namespace kme

#endif // KME_LATTICE_HPP
