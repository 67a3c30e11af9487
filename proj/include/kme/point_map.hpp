#ifndef KME_POINT_MAP_HPP
#define KME_POINT_MAP_HPP
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>

#include "error.hpp"

namespace kme {

/// A pointwise function R^in_dim -> R^out_dim.
///
/// Copies share the underlying callable, and two maps compare equal only
/// when they share it: extensional equality of functions is undecidable, so
/// identity of the callable is what kernels built from a map compare by.
class PointMap {
public:
    using Fn = std::function<void(std::span<const double> in, std::span<double> out)>;

    PointMap(std::size_t in_dim, std::size_t out_dim, Fn fn, std::string name = "f")
        : in_dim_(in_dim), out_dim_(out_dim), fn_(std::make_shared<const Fn>(std::move(fn))),
          name_(std::move(name)) {
        if (in_dim_ == 0 || out_dim_ == 0) throw ValidationError("PointMap: dimensions must be >= 1");
        if (!*fn_) throw ValidationError("PointMap: empty callable");
    }

    /// Scalar function R -> R.
    template <typename F>
    static PointMap scalar(F&& f, std::string name = "f") {
        return PointMap(
            1, 1,
            [g = std::forward<F>(f)](std::span<const double> in, std::span<double> out) {
                out[0] = g(in[0]);
            },
            std::move(name));
    }

    static PointMap identity(std::size_t dim) {
        return PointMap(
            dim, dim,
            [](std::span<const double> in, std::span<double> out) {
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i];
            },
            "identity");
    }

    std::size_t in_dim() const noexcept { return in_dim_; }
    std::size_t out_dim() const noexcept { return out_dim_; }
    const std::string& name() const noexcept { return name_; }

    void operator()(std::span<const double> in, std::span<double> out) const { (*fn_)(in, out); }

    bool same_as(const PointMap& other) const noexcept { return fn_ == other.fn_; }
    friend bool operator==(const PointMap& a, const PointMap& b) noexcept { return a.same_as(b); }

private:
    std::size_t in_dim_;
    std::size_t out_dim_;
    std::shared_ptr<const Fn> fn_;
    std::string name_;
};

} // namespace kme

#endif // KME_POINT_MAP_HPP
