#ifndef KME_REDUCED_SET_HPP
#define KME_REDUCED_SET_HPP
#pragma once

// Reduced-set compression: keep a random subset Z of the expansion points and
// re-fit the weights,
//
//   w* = argmin_w || sum_j w_j k(z_j, .) - mu ||^2 + lambda ||w||^2
//      = (K_ZZ + lambda I)^{-1} K_ZX w_X.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "embedding.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "sampling.hpp"

namespace kme {

enum class SubsetStrategy { random_subsample };

struct ReduceConfig {
    std::size_t target_size = 1;
    /// Ridge lambda >= 0; unset means 1e-8 * trace(K_ZZ) / n.
    std::optional<double> ridge;
    SubsetStrategy strategy = SubsetStrategy::random_subsample;
    std::uint64_t seed = 0;
};

struct ReducedSet {
    Embedding embedding;
    double ridge = 0.0;                // lambda actually used
    std::vector<std::size_t> subset;   // source indices kept, ascending
    double abs_weight_sum = 0.0;       // sum_j |w_j|
    double max_residual = 0.0;         // || (K + lambda I) w - b ||_inf
    double rhs_norm = 0.0;             // || b ||_inf
};

/// `count` distinct indices from [0, n), uniformly without replacement, ascending.
inline std::vector<std::size_t> random_subset(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) throw ValidationError("random_subset: cannot draw " + std::to_string(count) + " of " + std::to_string(n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.below(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace detail {

/// Drops subset entries whose point coincides exactly with an earlier one.
inline std::vector<std::size_t> dedupe_points(const WeightedSample& s, const std::vector<std::size_t>& subset) {
    std::vector<std::size_t> out;
    for (std::size_t idx : subset) {
        const auto p = s.point(idx);
        const bool dup = std::any_of(out.begin(), out.end(), [&](std::size_t q) {
            return std::equal(p.begin(), p.end(), s.point(q).begin());
        });
        if (!dup) out.push_back(idx);
    }
    return out;
}

} // namespace detail

/// Weights of the best approximation of `source` spanned by k(z_j, .), z_j
/// the rows of `points` (the solve behind reduce()).
inline ReducedSet fit_weights(const Embedding& source, const WeightedSample& points_only, std::vector<std::size_t> subset,
                              std::optional<double> ridge) {
    const Kernel& k = source.kernel();
    const auto n = static_cast<Eigen::Index>(points_only.size());
    const Eigen::MatrixXd kzz = gram(k, points_only.points());
    const Eigen::MatrixXd kzx = gram(k, points_only.points(), source.expansion().points());
    const Eigen::Map<const Eigen::VectorXd> wx(source.expansion().weights().data(),
                                               static_cast<Eigen::Index>(source.size()));
    const Eigen::VectorXd b = kzx * wx;

    const double lambda = ridge ? *ridge : 1e-8 * kzz.trace() / static_cast<double>(n);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("reduce: ridge must be finite and >= 0");

    Eigen::MatrixXd a = kzz;
    a.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    auto singular = [&] {
        return ValidationError("reduce: the reduced Gram system is singular at ridge " + format_double(lambda) +
                               "; use a positive ridge (e.g. leave it unset for the default)");
    };
    if (llt.info() != Eigen::Success) {
        if (lambda == 0.0) throw singular();
        throw DiagnosticsError("reduce: Cholesky failed on K + lambda I with lambda = " + format_double(lambda));
    }
    Eigen::VectorXd w = llt.solve(b);
    // one step of iterative refinement
    w += llt.solve(b - a * w);
    if (!w.allFinite()) {
        if (lambda == 0.0) throw singular();
        throw DiagnosticsError("reduce: non-finite weights");
    }
    const double residual = (a * w - b).lpNorm<Eigen::Infinity>();
    const double rhs = b.lpNorm<Eigen::Infinity>();
    if (lambda == 0.0 && residual > 1e-6 * std::max(rhs, 1e-300)) throw singular();

    std::vector<double> weights(w.data(), w.data() + w.size());
    ReducedSet out{Embedding(k, WeightedSample(source.dim(), points_only.coords(), std::move(weights))), lambda,
                   std::move(subset)};
    out.abs_weight_sum = w.lpNorm<1>();
    out.max_residual = residual;
    out.rhs_norm = rhs;
    return out;
}

/// Reduced expansion with full diagnostics.
inline ReducedSet reduce_detailed(const Embedding& e, const ReduceConfig& cfg) {
    if (cfg.target_size == 0) throw ValidationError("reduce: target_size must be >= 1");
    if (cfg.target_size > e.size()) {
        throw ValidationError("reduce: target_size " + std::to_string(cfg.target_size) + " exceeds expansion size " +
                              std::to_string(e.size()));
    }
    if (cfg.ridge && !(*cfg.ridge >= 0.0)) throw ValidationError("reduce: ridge must be >= 0");
    std::vector<std::size_t> subset = random_subset(e.size(), cfg.target_size, cfg.seed);
    if (cfg.ridge && *cfg.ridge == 0.0) subset = detail::dedupe_points(e.expansion(), subset);

    const auto& src = e.expansion();
    std::vector<double> coords;
    coords.reserve(subset.size() * src.dim());
    for (std::size_t idx : subset) {
        const auto p = src.point(idx);
        coords.insert(coords.end(), p.begin(), p.end());
    }
    WeightedSample points(src.dim(), std::move(coords), std::vector<double>(subset.size(), 0.0));
    return fit_weights(e, points, std::move(subset), cfg.ridge);
}

inline Embedding reduce(const Embedding& e, const ReduceConfig& cfg) { return reduce_detailed(e, cfg).embedding; }

/// ||mu' - mu||.
inline double reduction_error(const Embedding& original, const Embedding& reduced) {
    return std::sqrt(rkhs_dist2(original, reduced));
}

/// ||sum_j w_j k(z_j, .) - mu||^2 + lambda ||w||^2 for the expansion `candidate`.
inline double reduction_objective(const Embedding& original, const Embedding& candidate, double lambda) {
    double w2 = 0.0;
    for (double w : candidate.expansion().weights()) w2 += w * w;
    return rkhs_dist2(original, candidate) + lambda * w2;
}

} // namespace kme

#endif // KME_REDUCED_SET_HPP
