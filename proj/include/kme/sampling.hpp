#ifndef KME_SAMPLING_HPP
#define KME_SAMPLING_HPP
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "kernels.hpp"
#include "point_map.hpp"

namespace kme {

/// Expansion {(x_i, w_i)}: n points in R^dim with real (possibly negative) weights.
class WeightedSample {
public:
    WeightedSample() = default;

    /// `coords` holds the points row-major; its size must be weights.size() * dim.
    WeightedSample(std::size_t dim, std::vector<double> coords, std::vector<double> weights)
        : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
        if (dim_ == 0) throw ValidationError("WeightedSample: dimension must be >= 1");
        if (coords_.size() != weights_.size() * dim_) {
            throw ValidationError("WeightedSample: " + std::to_string(coords_.size()) + " coordinates for " +
                                  std::to_string(weights_.size()) + " weights at dimension " + std::to_string(dim_));
        }
        for (std::size_t i = 0; i < coords_.size(); ++i) {
            if (!std::isfinite(coords_[i])) {
                throw ValidationError("WeightedSample: non-finite coordinate at point " + std::to_string(i / dim_));
            }
        }
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (!std::isfinite(weights_[i])) {
                throw ValidationError("WeightedSample: non-finite weight at index " + std::to_string(i));
            }
        }
    }

    /// One-dimensional sample from (x, w) pairs.
    static WeightedSample scalar(std::initializer_list<std::pair<double, double>> pairs) {
        std::vector<double> xs, ws;
        for (const auto& [x, w] : pairs) {
            xs.push_back(x);
            ws.push_back(w);
        }
        return WeightedSample(1, std::move(xs), std::move(ws));
    }

    /// Points with uniform weights 1/n.
    static WeightedSample uniform(std::size_t dim, std::vector<double> coords) {
        if (dim == 0) throw ValidationError("WeightedSample: dimension must be >= 1");
        const std::size_t n = coords.size() / dim;
        if (n == 0) throw ValidationError("WeightedSample::uniform: no points");
        return WeightedSample(dim, std::move(coords), std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return weights_.size(); }
    bool empty() const noexcept { return weights_.empty(); }

    std::span<const double> point(std::size_t i) const noexcept {
        return std::span<const double>(coords_).subspan(i * dim_, dim_);
    }
    double weight(std::size_t i) const noexcept { return weights_[i]; }

    const std::vector<double>& coords() const noexcept { return coords_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    PointsView points() const noexcept { return PointsView{coords_, dim_}; }

    friend bool operator==(const WeightedSample&, const WeightedSample&) = default;

private:
    std::size_t dim_ = 1;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

/// Independent Gaussian coordinates N(mean_i, std_i^2).
struct GaussianSpec {
    std::vector<double> mean;
    std::vector<double> stddev;

    GaussianSpec() = default;
    GaussianSpec(std::vector<double> m, std::vector<double> s) : mean(std::move(m)), stddev(std::move(s)) {
        validate();
    }
    GaussianSpec(double m, double s) : GaussianSpec(std::vector<double>{m}, std::vector<double>{s}) {}

    std::size_t dim() const noexcept { return mean.size(); }

    void validate() const {
        if (mean.empty() || mean.size() != stddev.size()) {
            throw ValidationError("GaussianSpec: mean and stddev must be non-empty and of equal length");
        }
        for (std::size_t i = 0; i < mean.size(); ++i) {
            if (!std::isfinite(mean[i]) || !std::isfinite(stddev[i]) || !(stddev[i] > 0.0)) {
                throw ValidationError("GaussianSpec: coordinate " + std::to_string(i) +
                                      " needs a finite mean and a finite stddev > 0");
            }
        }
    }

    /// Largest per-coordinate P(X_i <= 0).
    double max_nonpositive_probability() const {
        double p = 0.0;
        for (std::size_t i = 0; i < mean.size(); ++i) {
            p = std::max(p, 0.5 * std::erfc(mean[i] / (stddev[i] * std::numbers::sqrt2)));
        }
        return p;
    }
};

/// SplitMix64 mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Sub-seed for an independent stream, e.g. derive_seed(seed, trial, N).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(seed);
    for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

/// SplitMix64 generator. Small value type: copy it to fork a stream.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in (0, 1].
    double uniform_open0() noexcept { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

    /// Uniform in [0, n).
    std::size_t below(std::size_t n) noexcept {
        // Lemire's multiply-shift; bias is < n / 2^64.
        return static_cast<std::size_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

/// Standard normal variates by the Box-Muller transform; both variates of a
/// pair are used.
class NormalGenerator {
public:
    explicit NormalGenerator(std::uint64_t seed) noexcept : rng_(seed) {}

    double operator()() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = rng_.uniform_open0();
        const double u2 = rng_.uniform_open0();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    Rng rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// n i.i.d. draws from `spec`, each with weight 1/n.
inline WeightedSample sample_gaussian(const GaussianSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw ValidationError("sample_gaussian: n must be >= 1");
    const std::size_t d = spec.dim();
    NormalGenerator normal(seed);
    std::vector<double> coords(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) coords[i * d + j] = spec.mean[j] + spec.stddev[j] * normal();
    }
    return WeightedSample(d, std::move(coords), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

/// {(f(x_i), w_i)}: weights are copied unchanged.
inline WeightedSample apply_fn(const PointMap& f, const WeightedSample& s) {
    if (f.in_dim() != s.dim()) {
        throw ValidationError("apply_fn: map '" + f.name() + "' expects dimension " + std::to_string(f.in_dim()) +
                              ", sample has " + std::to_string(s.dim()));
    }
    return WeightedSample(f.out_dim(), detail::map_coords(f, s.points()), s.weights());
}

} // namespace kme

#endif // KME_SAMPLING_HPP
