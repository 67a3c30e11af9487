#ifndef KME_ESTIMATORS_HPP
#define KME_ESTIMATORS_HPP
#pragma once

// Estimators of the embedding of Z = f(X, Y) for independent X and Y:
//   diagonal   (1/N) sum_i kz(f(x_i, y_i), .)
//   U-statistic (1/N^2) sum_ij kz(f(x_i, y_j), .)
//   reduced    sum_ij w_i u_j kz(f(x_i, y_j), .) over (possibly reduced) expansions
// Product expansions enumerate i outer, j inner.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "embedding.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "lattice.hpp"
#include "point_map.hpp"
#include "sampling.hpp"

namespace kme {

/// Largest expansion an estimator may materialize.
inline constexpr std::size_t kMaxExpansionPoints = 10'000'000;

/// f : R^x_dim x R^y_dim -> R^out_dim.
class BinaryMap {
public:
    using Fn = std::function<void(std::span<const double> x, std::span<const double> y, std::span<double> out)>;

    BinaryMap(std::size_t x_dim, std::size_t y_dim, std::size_t out_dim, Fn fn, std::string name)
        : x_dim_(x_dim), y_dim_(y_dim), out_dim_(out_dim), fn_(std::make_shared<const Fn>(std::move(fn))),
          name_(std::move(name)) {
        if (x_dim_ == 0 || y_dim_ == 0 || out_dim_ == 0) throw ValidationError("BinaryMap: dimensions must be >= 1");
    }

    template <typename F>
    static BinaryMap scalar(F&& f, std::string name) {
        return BinaryMap(
            1, 1, 1,
            [g = std::forward<F>(f)](std::span<const double> x, std::span<const double> y, std::span<double> out) {
                out[0] = g(x[0], y[0]);
            },
            std::move(name));
    }

    static BinaryMap multiply() {
        return scalar([](double x, double y) { return x * y; }, "multiply");
    }
    static BinaryMap divide() {
        return scalar([](double x, double y) { return x / y; }, "divide");
    }
    /// x^y as exp(y ln x); defined for x > 0 (NaN otherwise, rejected downstream).
    static BinaryMap power() {
        return scalar([](double x, double y) { return x > 0.0 ? std::exp(y * std::log(x)) : std::nan(""); }, "power");
    }
    static BinaryMap first() {
        return scalar([](double x, double) { return x; }, "first");
    }

    std::size_t x_dim() const noexcept { return x_dim_; }
    std::size_t y_dim() const noexcept { return y_dim_; }
    std::size_t out_dim() const noexcept { return out_dim_; }
    const std::string& name() const noexcept { return name_; }

    void operator()(std::span<const double> x, std::span<const double> y, std::span<double> out) const {
        (*fn_)(x, y, out);
    }

    /// The same function on concatenated points (x, y).
    PointMap joint() const {
        auto fn = fn_;
        const std::size_t dx = x_dim_;
        return PointMap(
            x_dim_ + y_dim_, out_dim_,
            [fn, dx](std::span<const double> in, std::span<double> out) { (*fn)(in.first(dx), in.subspan(dx), out); },
            name_);
    }

private:
    std::size_t x_dim_, y_dim_, out_dim_;
    std::shared_ptr<const Fn> fn_;
    std::string name_;
};

struct TwoArgProblem {
    WeightedSample xs;
    WeightedSample ys;
    BinaryMap f;
    Kernel kz;

    void validate() const {
        if (xs.dim() != f.x_dim() || ys.dim() != f.y_dim()) {
            throw ValidationError("TwoArgProblem: sample dimensions do not match map '" + f.name() + "'");
        }
        if (kz.dim() != f.out_dim()) throw ValidationError("TwoArgProblem: kz dimension does not match map output");
        if (xs.empty() || ys.empty()) throw ValidationError("TwoArgProblem: empty input sample");
    }
};

namespace detail {

inline bool has_uniform_weights(const WeightedSample& s) {
    const double target = 1.0 / static_cast<double>(s.size());
    for (double w : s.weights()) {
        if (std::abs(w - target) > 1e-12 * target) return false;
    }
    return true;
}

inline void check_finite_output(std::span<const double> out, const BinaryMap& f, std::size_t i, std::size_t j) {
    for (double v : out) {
        if (!std::isfinite(v)) {
            throw ValidationError("map '" + f.name() + "' produced a non-finite value at pair (" + std::to_string(i) +
                                  ", " + std::to_string(j) + ")");
        }
    }
}

inline void guard_size(std::size_t n, std::size_t m) {
    if (m != 0 && n > kMaxExpansionPoints / m) {
        throw ValidationError("estimator would materialize " + std::to_string(n) + " x " + std::to_string(m) +
                              " expansion points (limit " + std::to_string(kMaxExpansionPoints) +
                              "); reduce the inputs first");
    }
}

/// Calls visit(i, j, z, w_i * u_j) for every pair, i outer and j inner.
template <typename Visit>
void for_each_pair(const WeightedSample& xs, const WeightedSample& ys, const BinaryMap& f, Visit&& visit) {
    std::vector<double> z(f.out_dim());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto xi = xs.point(i);
        const double wi = xs.weight(i);
        for (std::size_t j = 0; j < ys.size(); ++j) {
            f(xi, ys.point(j), z);
            check_finite_output(z, f, i, j);
            visit(i, j, std::span<const double>(z), wi * ys.weight(j));
        }
    }
}

} // namespace detail

/// (1/N) sum_i kz(f(x_i, y_i), .) for paired i.i.d. samples.
inline Embedding diagonal_estimator(const TwoArgProblem& p) {
    p.validate();
    if (p.xs.size() != p.ys.size()) {
        throw ValidationError("diagonal_estimator: samples have different lengths (" + std::to_string(p.xs.size()) +
                              " vs " + std::to_string(p.ys.size()) + ")");
    }
    if (!detail::has_uniform_weights(p.xs) || !detail::has_uniform_weights(p.ys)) {
        throw ValidationError("diagonal_estimator: requires uniform weights 1/N on both samples");
    }
    detail::guard_size(p.xs.size(), 1);
    const std::size_t n = p.xs.size();
    std::vector<double> coords(n * p.f.out_dim());
    for (std::size_t i = 0; i < n; ++i) {
        std::span<double> z(coords.data() + i * p.f.out_dim(), p.f.out_dim());
        p.f(p.xs.point(i), p.ys.point(i), z);
        detail::check_finite_output(z, p.f, i, i);
    }
    return Embedding(p.kz, WeightedSample(p.f.out_dim(), std::move(coords), p.xs.weights()));
}

/// sum_ij w_i u_j kz(f(x_i, y_j), .) for arbitrary weights.
inline Embedding reduced_estimator(const TwoArgProblem& p) {
    p.validate();
    detail::guard_size(p.xs.size(), p.ys.size());
    std::vector<double> coords;
    std::vector<double> weights;
    coords.reserve(p.xs.size() * p.ys.size() * p.f.out_dim());
    weights.reserve(p.xs.size() * p.ys.size());
    detail::for_each_pair(p.xs, p.ys, p.f, [&](std::size_t, std::size_t, std::span<const double> z, double w) {
        coords.insert(coords.end(), z.begin(), z.end());
        weights.push_back(w);
    });
    return Embedding(p.kz, WeightedSample(p.f.out_dim(), std::move(coords), std::move(weights)));
}

/// (1/(N M)) sum_ij kz(f(x_i, y_j), .); weights are formed as (1/N)(1/M)
/// so the result coincides with the tensor-product route bit for bit.
inline Embedding ustat_estimator(const TwoArgProblem& p) {
    p.validate();
    if (!detail::has_uniform_weights(p.xs) || !detail::has_uniform_weights(p.ys)) {
        throw ValidationError("ustat_estimator: requires uniform weights on both samples");
    }
    return reduced_estimator(p);
}

/// Streams the pairs of the product estimator into a lattice expansion
/// without materializing all n * m points; scalar-valued maps only.
inline void accumulate_product(const WeightedSample& xs, const WeightedSample& ys, const BinaryMap& f,
                               LatticeExpansion& out) {
    if (f.out_dim() != 1) throw ValidationError("accumulate_product: map must be scalar-valued");
    if (xs.dim() != f.x_dim() || ys.dim() != f.y_dim()) {
        throw ValidationError("accumulate_product: sample dimensions do not match map '" + f.name() + "'");
    }
    detail::for_each_pair(xs, ys, f, [&](std::size_t, std::size_t, std::span<const double> z, double w) {
        out.add(z[0], w);
    });
}

} // namespace kme

#endif // KME_ESTIMATORS_HPP
