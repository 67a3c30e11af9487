#ifndef KME_KERNELS_HPP
#define KME_KERNELS_HPP
#pragma once

// Positive-definite kernels on R^d.
//
// All kernels are immutable values; evaluation and Gram construction are
// pure and thread-safe. Evaluation is symmetric bit-for-bit: every formula
// depends on its arguments only through pointwise symmetric expressions
// ((x_i - y_i)^2, x_i * y_i) accumulated in coordinate order.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "bessel.hpp"
#include "error.hpp"
#include "format.hpp"
#include "point_map.hpp"

namespace kme {

/// Row-major view of n points in R^dim.
struct PointsView {
    std::span<const double> coords;
    std::size_t dim = 1;

    std::size_t size() const noexcept { return dim == 0 ? 0 : coords.size() / dim; }
    std::span<const double> operator[](std::size_t i) const noexcept { return coords.subspan(i * dim, dim); }
};

struct GaussianKernel {
    double sigma;
    std::size_t dim;
    friend bool operator==(const GaussianKernel&, const GaussianKernel&) = default;
};

struct LaplacianKernel {
    double sigma;
    std::size_t dim;
    friend bool operator==(const LaplacianKernel&, const LaplacianKernel&) = default;
};

struct PolynomialKernel {
    unsigned degree;
    std::size_t dim;
    friend bool operator==(const PolynomialKernel&, const PolynomialKernel&) = default;
};

/// Matérn kernel 2^{1-s}/Gamma(s) r^{s-d/2} K_{d/2-s}(r). Not normalized:
/// k(x,x) = 2^{-d/2} Gamma(s-d/2)/Gamma(s) unless `normalized` is set.
struct MaternKernel {
    double s;
    std::size_t dim;
    bool normalized = false;

    // Derived constants, fixed at construction.
    double nu = 0.0;         // s - d/2 > 0
    double scale = 0.0;      // 2^{1-s} / Gamma(s)
    double diagonal = 0.0;   // limit r -> 0 of the unnormalized kernel
    bool half_integer = false;
    unsigned half_m = 0;     // nu = half_m + 1/2 when half_integer

    /// Unnormalized value as a function of the distance r >= 0.
    double radial(double r) const {
        if (r == 0.0) return diagonal;
        if (r > 745.0) return 0.0;
        if (half_integer) {
            // r^{m+1/2} K_{m+1/2}(r) = sqrt(pi/2) e^{-r} poly_m(r)
            return scale * std::sqrt(std::numbers::pi / 2.0) * std::exp(-r) * detail::half_integer_poly(half_m, r);
        }
        const double v = scale * std::pow(r, nu) * detail::bessel_k_general(nu, r);
        return std::isfinite(v) ? std::min(v, diagonal) : diagonal;
    }

    friend bool operator==(const MaternKernel& a, const MaternKernel& b) {
        return a.s == b.s && a.dim == b.dim && a.normalized == b.normalized;
    }
};

class Kernel;

struct ProductKernel {
    std::shared_ptr<const Kernel> left;
    std::shared_ptr<const Kernel> right;
};

/// k(x, y) = outer(f(x), f(y)).
struct PullbackKernel {
    std::shared_ptr<const Kernel> outer;
    PointMap map;
};

class Kernel {
public:
    using Variant = std::variant<GaussianKernel, LaplacianKernel, PolynomialKernel, MaternKernel, ProductKernel,
                                 PullbackKernel>;

    static Kernel gaussian(double sigma, std::size_t dim = 1) {
        check_dim(dim);
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw ValidationError("gaussian kernel: sigma must be finite and > 0");
        }
        return Kernel(GaussianKernel{sigma, dim});
    }

    static Kernel laplacian(double sigma, std::size_t dim = 1) {
        check_dim(dim);
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw ValidationError("laplacian kernel: sigma must be finite and > 0");
        }
        return Kernel(LaplacianKernel{sigma, dim});
    }

    static Kernel polynomial(unsigned degree, std::size_t dim = 1) {
        check_dim(dim);
        if (degree == 0) throw ValidationError("polynomial kernel: degree must be >= 1");
        return Kernel(PolynomialKernel{degree, dim});
    }

    static Kernel matern(double s, std::size_t dim = 1, bool normalized = false) {
        check_dim(dim);
        const double half_d = 0.5 * static_cast<double>(dim);
        if (!std::isfinite(s) || !(s > half_d)) {
            throw ValidationError("matern kernel: smoothness s = " + format_double(s) + " must exceed d/2 = " +
                                  format_double(half_d));
        }
        MaternKernel m{s, dim, normalized};
        m.nu = s - half_d;
        m.scale = std::pow(2.0, 1.0 - s) / std::tgamma(s);
        m.diagonal = std::pow(2.0, -half_d) * std::tgamma(m.nu) / std::tgamma(s);
        m.half_integer = detail::is_half_integer(m.nu);
        if (m.half_integer) {
            m.half_m = static_cast<unsigned>(std::floor(m.nu));
            // Keeps radial() continuous at r = 0 to the last bit.
            m.diagonal = m.scale * std::sqrt(std::numbers::pi / 2.0) * detail::half_integer_poly(m.half_m, 0.0);
        }
        return Kernel(std::move(m));
    }

    /// Kernel on R^{d1+d2}: k((x1,y1),(x2,y2)) = kx(x1,x2) ky(y1,y2).
    static Kernel product(Kernel kx, Kernel ky) {
        return Kernel(ProductKernel{std::make_shared<const Kernel>(std::move(kx)),
                                    std::make_shared<const Kernel>(std::move(ky))});
    }

    static Kernel pullback(Kernel outer, PointMap map) {
        if (map.out_dim() != outer.dim()) {
            throw ValidationError("pullback kernel: map output dimension " + std::to_string(map.out_dim()) +
                                  " does not match kernel dimension " + std::to_string(outer.dim()));
        }
        return Kernel(PullbackKernel{std::make_shared<const Kernel>(std::move(outer)), std::move(map)});
    }

    const Variant& variant() const noexcept { return v_; }

    std::size_t dim() const {
        return std::visit(
            [](const auto& k) -> std::size_t {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ProductKernel>) {
                    return k.left->dim() + k.right->dim();
                } else if constexpr (std::is_same_v<T, PullbackKernel>) {
                    return k.map.in_dim();
                } else {
                    return k.dim;
                }
            },
            v_);
    }

    bool is_gaussian() const noexcept { return std::holds_alternative<GaussianKernel>(v_); }

    /// Checked evaluation.
    double operator()(std::span<const double> x, std::span<const double> y) const {
        const std::size_t d = dim();
        if (x.size() != d || y.size() != d) {
            throw ValidationError("kernel eval: expected points of dimension " + std::to_string(d) + ", got " +
                                  std::to_string(x.size()) + " and " + std::to_string(y.size()));
        }
        for (std::size_t i = 0; i < d; ++i) {
            if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
                throw ValidationError("kernel eval: non-finite coordinate");
            }
        }
        return eval_unchecked(x, y);
    }

    double operator()(double x, double y) const {
        return (*this)(std::span<const double>(&x, 1), std::span<const double>(&y, 1));
    }

    /// Evaluation without dimension/finiteness checks.
    double eval_unchecked(std::span<const double> x, std::span<const double> y) const {
        return std::visit([&](const auto& k) { return eval_impl(k, x, y); }, v_);
    }

    /// Value of k(x, x) when it does not depend on x (translation-invariant kernels).
    std::optional<double> constant_diagonal() const {
        if (std::holds_alternative<GaussianKernel>(v_) || std::holds_alternative<LaplacianKernel>(v_)) return 1.0;
        if (const auto* m = std::get_if<MaternKernel>(&v_)) return m->normalized ? 1.0 : m->diagonal;
        return std::nullopt;
    }

    /// Text descriptor, e.g. "gaussian(sigma=0.5,dim=1)"; parsed back by parse_kernel().
    std::string describe() const {
        return std::visit(
            [](const auto& k) -> std::string {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, GaussianKernel>) {
                    return "gaussian(sigma=" + format_double(k.sigma) + ",dim=" + std::to_string(k.dim) + ")";
                } else if constexpr (std::is_same_v<T, LaplacianKernel>) {
                    return "laplacian(sigma=" + format_double(k.sigma) + ",dim=" + std::to_string(k.dim) + ")";
                } else if constexpr (std::is_same_v<T, PolynomialKernel>) {
                    return "polynomial(degree=" + std::to_string(k.degree) + ",dim=" + std::to_string(k.dim) + ")";
                } else if constexpr (std::is_same_v<T, MaternKernel>) {
                    return "matern(s=" + format_double(k.s) + ",dim=" + std::to_string(k.dim) +
                           (k.normalized ? ",normalized=1)" : ")");
                } else if constexpr (std::is_same_v<T, ProductKernel>) {
                    return "product(" + k.left->describe() + "," + k.right->describe() + ")";
                } else {
                    return "pullback(" + k.outer->describe() + "," + k.map.name() + ")";
                }
            },
            v_);
    }

    friend bool operator==(const Kernel& a, const Kernel& b) {
        if (a.v_.index() != b.v_.index()) return false;
        return std::visit(
            [&](const auto& ka) -> bool {
                using T = std::decay_t<decltype(ka)>;
                const auto& kb = std::get<T>(b.v_);
                if constexpr (std::is_same_v<T, ProductKernel>) {
                    return *ka.left == *kb.left && *ka.right == *kb.right;
                } else if constexpr (std::is_same_v<T, PullbackKernel>) {
                    return *ka.outer == *kb.outer && ka.map.same_as(kb.map);
                } else {
                    return ka == kb;
                }
            },
            a.v_);
    }

    /// Fills g (pre-sized n x m) for a leaf kernel; composite kernels go through gram().
    void fill_gram(const PointsView& x, const PointsView& y, bool symmetric, Eigen::MatrixXd& g) const {
        std::visit(
            [&](const auto& k) {
                const auto n = static_cast<Eigen::Index>(x.size());
                const auto m = static_cast<Eigen::Index>(y.size());
                if (symmetric) {
                    for (Eigen::Index j = 0; j < m; ++j) {
                        for (Eigen::Index i = 0; i <= j; ++i) {
                            const double v = eval_impl(k, x[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)]);
                            g(i, j) = v;
                            g(j, i) = v;
                        }
                    }
                } else {
                    for (Eigen::Index j = 0; j < m; ++j) {
                        for (Eigen::Index i = 0; i < n; ++i) {
                            g(i, j) = eval_impl(k, x[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)]);
                        }
                    }
                }
            },
            v_);
    }

private:
    explicit Kernel(Variant v) : v_(std::move(v)) {}

    static void check_dim(std::size_t dim) {
        if (dim == 0) throw ValidationError("kernel dimension must be >= 1");
    }

    static double squared_distance(std::span<const double> x, std::span<const double> y) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double diff = x[i] - y[i];
            acc += diff * diff;
        }
        return acc;
    }

    static double eval_impl(const GaussianKernel& k, std::span<const double> x, std::span<const double> y) {
        const double arg = -squared_distance(x, y) / (2.0 * k.sigma * k.sigma);
        return arg < -700.0 ? 0.0 : std::exp(arg);
    }

    static double eval_impl(const LaplacianKernel& k, std::span<const double> x, std::span<const double> y) {
        const double arg = -std::sqrt(squared_distance(x, y)) / k.sigma;
        return arg < -700.0 ? 0.0 : std::exp(arg);
    }

    static double eval_impl(const PolynomialKernel& k, std::span<const double> x, std::span<const double> y) {
        double dot = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
        const double base = dot + 1.0;
        double out = 1.0;
        for (unsigned p = 0; p < k.degree; ++p) out *= base;
        return out;
    }

    static double eval_impl(const MaternKernel& k, std::span<const double> x, std::span<const double> y) {
        const double v = k.radial(std::sqrt(squared_distance(x, y)));
        return k.normalized ? v / k.diagonal : v;
    }

    static double eval_impl(const ProductKernel& k, std::span<const double> x, std::span<const double> y) {
        const std::size_t d1 = k.left->dim();
        return k.left->eval_unchecked(x.first(d1), y.first(d1)) *
               k.right->eval_unchecked(x.subspan(d1), y.subspan(d1));
    }

    static double eval_impl(const PullbackKernel& k, std::span<const double> x, std::span<const double> y) {
        std::vector<double> fx(k.map.out_dim());
        std::vector<double> fy(k.map.out_dim());
        k.map(x, fx);
        k.map(y, fy);
        for (std::size_t i = 0; i < fx.size(); ++i) {
            if (!std::isfinite(fx[i]) || !std::isfinite(fy[i])) {
                throw ValidationError("pullback kernel: map '" + k.map.name() + "' produced a non-finite value");
            }
        }
        return k.outer->eval_unchecked(fx, fy);
    }

    Variant v_;
};

inline double eval(const Kernel& k, std::span<const double> x, std::span<const double> y) { return k(x, y); }

inline Kernel product_kernel(Kernel kx, Kernel ky) { return Kernel::product(std::move(kx), std::move(ky)); }

namespace detail {

inline void check_points(const Kernel& k, const PointsView& p, const char* what) {
    if (p.dim != k.dim()) {
        throw ValidationError(std::string("gram: ") + what + " has dimension " + std::to_string(p.dim) +
                              ", kernel expects " + std::to_string(k.dim()));
    }
    if (p.coords.size() % p.dim != 0) throw ValidationError(std::string("gram: ragged point list ") + what);
    for (double c : p.coords) {
        if (!std::isfinite(c)) throw ValidationError(std::string("gram: non-finite coordinate in ") + what);
    }
}

/// Copies coordinate range [begin, begin+len) of every point into a new row-major array.
inline std::vector<double> slice_coords(const PointsView& p, std::size_t begin, std::size_t len) {
    std::vector<double> out;
    out.reserve(p.size() * len);
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto pt = p[i];
        out.insert(out.end(), pt.begin() + static_cast<std::ptrdiff_t>(begin),
                   pt.begin() + static_cast<std::ptrdiff_t>(begin + len));
    }
    return out;
}

inline std::vector<double> map_coords(const PointMap& f, const PointsView& p) {
    std::vector<double> out(p.size() * f.out_dim());
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::span<double> dst(out.data() + i * f.out_dim(), f.out_dim());
        f(p[i], dst);
        for (double v : dst) {
            if (!std::isfinite(v)) {
                throw ValidationError("map '" + f.name() + "' produced a non-finite value at index " +
                                      std::to_string(i));
            }
        }
    }
    return out;
}

inline Eigen::MatrixXd gram_impl(const Kernel& k, const PointsView& x, const PointsView& y, bool symmetric) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto m = static_cast<Eigen::Index>(y.size());
    if (const auto* prod = std::get_if<ProductKernel>(&k.variant())) {
        const std::size_t d1 = prod->left->dim();
        const std::size_t d2 = prod->right->dim();
        const auto x1 = slice_coords(x, 0, d1), x2 = slice_coords(x, d1, d2);
        const auto y1 = slice_coords(y, 0, d1), y2 = slice_coords(y, d1, d2);
        Eigen::MatrixXd g = gram_impl(*prod->left, {x1, d1}, {y1, d1}, symmetric);
        g.array() *= gram_impl(*prod->right, {x2, d2}, {y2, d2}, symmetric).array();
        return g;
    }
    if (const auto* pb = std::get_if<PullbackKernel>(&k.variant())) {
        const std::size_t dz = pb->map.out_dim();
        const auto fx = map_coords(pb->map, x);
        if (symmetric) return gram_impl(*pb->outer, {fx, dz}, {fx, dz}, true);
        const auto fy = map_coords(pb->map, y);
        return gram_impl(*pb->outer, {fx, dz}, {fy, dz}, false);
    }
    Eigen::MatrixXd g(n, m);
    k.fill_gram(x, y, symmetric, g);
    return g;
}

} // namespace detail

/// G(i, j) = k(x_i, y_j). Empty inputs yield a 0-sized matrix.
inline Eigen::MatrixXd gram(const Kernel& k, const PointsView& x, const PointsView& y) {
    detail::check_points(k, x, "X");
    detail::check_points(k, y, "Y");
    const bool symmetric = x.coords.data() == y.coords.data() && x.coords.size() == y.coords.size();
    return detail::gram_impl(k, x, y, symmetric);
}

inline Eigen::MatrixXd gram(const Kernel& k, const PointsView& x) { return gram(k, x, x); }

/// Smallest eigenvalue of a symmetric matrix (0 for an empty matrix).
inline double min_eigenvalue(const Eigen::MatrixXd& g) {
    if (g.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

} // namespace kme

#endif // KME_KERNELS_HPP
