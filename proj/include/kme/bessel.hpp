#ifndef KME_BESSEL_HPP
#define KME_BESSEL_HPP
#pragma once

// Modified Bessel function of the second kind K_nu (Macdonald function).
//
// Half-integer orders nu = m + 1/2 use the terminating closed form
//   K_{m+1/2}(r) = sqrt(pi / (2 r)) e^{-r} sum_k (m+k)! / (k! (m-k)!) (2r)^{-k}.
// Other orders reduce nu to mu in [-1/2, 1/2), evaluate K_mu and K_{mu+1}
// with Temme's series (r <= 2) or Steed's continued fraction (r > 2), and
// recur upward with K_{v+1} = K_{v-1} + (2 v / r) K_v.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace kme {

namespace detail {

inline constexpr double kBesselEps = 1e-16;
inline constexpr int kBesselMaxIter = 10000;

/// Taylor coefficients of 1/Gamma(1+z) around z = 0.
inline constexpr std::array<double, 27> kInvGamma1pCoeffs = {
    1.0,
    0.57721566490153286555,
    -0.65587807152025390245,
    -0.042002635034095237021,
    0.16653861138229150707,
    -0.04219773455554433339,
    -0.0096219715278769730321,
    0.0072189432466630990351,
    -0.0011651675918590649519,
    -0.00021524167411495097519,
    0.00012805028238811619551,
    -0.000020134854780788238686,
    -1.2504934821426708425e-6,
    1.1330272319816959286e-6,
    -2.0563384169776070734e-7,
    6.1160951044814160872e-9,
    5.0020076444692229454e-9,
    -1.1812745704870202509e-9,
    1.0434267116911005398e-10,
    7.7822634399050708143e-12,
    -3.6968056186422059787e-12,
    5.1003702874544767635e-13,
    -2.0583260535665066357e-14,
    -5.3481225394230170314e-15,
    1.2267786282382608409e-15,
    -1.1812593016974588337e-16,
    1.1866922547516003746e-18,
};

struct TemmeGammas {
    double gam1;   // (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
    double gam2;   // (1/G(1-mu) + 1/G(1+mu)) / 2
    double gampl;  // 1/G(1+mu)
    double gammi;  // 1/G(1-mu)
};

// |mu| <= 1/2: the Taylor series converges fast and avoids the 0/0 in gam1.
inline TemmeGammas temme_gammas(double mu) {
    const double mu2 = mu * mu;
    double even = 0.0;
    double odd = 0.0;
    double p = 1.0;
    for (std::size_t k = 0; k + 1 < kInvGamma1pCoeffs.size(); k += 2) {
        even += kInvGamma1pCoeffs[k] * p;
        odd += kInvGamma1pCoeffs[k + 1] * p;
        p *= mu2;
    }
    TemmeGammas g{};
    g.gam1 = -odd;
    g.gam2 = even;
    g.gampl = even + mu * odd;
    g.gammi = even - mu * odd;
    return g;
}

/// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2.
inline std::pair<double, double> bessel_k_base(double mu, double x) {
    const double pi = std::numbers::pi;
    if (x <= 2.0) {
        const double x2 = 0.5 * x;
        const double pimu = pi * mu;
        const double fact = std::abs(pimu) < kBesselEps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::abs(e) < kBesselEps ? 1.0 : std::sinh(e) / e;
        const TemmeGammas g = temme_gammas(mu);
        double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / g.gampl;
        double q = 0.5 / (e * g.gammi);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        for (int i = 1; i <= kBesselMaxIter; ++i) {
            const double di = i;
            ff = (di * ff + p + q) / (di * di - mu * mu);
            c *= d / di;
            p /= di - mu;
            q /= di + mu;
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - di * ff);
            if (std::abs(del) < std::abs(sum) * kBesselEps) break;
        }
        return {sum, sum1 * (2.0 / x)};
    }

    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu * mu;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 1; i <= kBesselMaxIter; ++i) {
        const double di = i;
        a -= 2.0 * di;
        c = -a * c / (di + 1.0);
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < kBesselEps) break;
    }
    h *= a1;
    const double kmu = std::sqrt(pi / (2.0 * x)) * std::exp(-x) / s;
    const double kmu1 = kmu * (mu + x + 0.5 - h) / x;
    return {kmu, kmu1};
}

inline bool is_half_integer(double nu) {
    const double twice = 2.0 * nu;
    const double rounded = std::round(twice);
    return std::abs(twice - rounded) <= 1e-12 * std::max(1.0, std::abs(twice)) &&
           std::fmod(std::abs(rounded), 2.0) == 1.0;
}

/// Polynomial part of the half-integer closed form, scaled so that
/// r^{m+1/2} K_{m+1/2}(r) = sqrt(pi/2) e^{-r} * half_integer_poly(m, r).
inline double half_integer_poly(unsigned m, double r) {
    // sum_k a_k r^{m-k} with a_k = (m+k)! / (k! (m-k)!) 2^{-k}, Horner in r
    // from the leading a_0 = 1.
    double a = 1.0;
    double acc = 1.0;
    for (unsigned k = 1; k <= m; ++k) {
        a *= static_cast<double>(m + k) * static_cast<double>(m - k + 1) / (2.0 * k);
        acc = acc * r + a;
    }
    return acc;
}

/// Temme / continued-fraction path, valid for every order; exposed so the
/// half-integer closed form can be cross-checked against it.
inline double bessel_k_general(double nu, double r) {
    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;
    auto [kmu, k1] = bessel_k_base(mu, r);
    for (int i = 1; i <= nl; ++i) {
        const double next = (mu + i) * (2.0 / r) * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    return kmu;
}

} // namespace detail

/// K_nu(r) for real nu and r > 0.
inline double bessel_k(double nu, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw ValidationError("bessel_k: argument must be finite and > 0, got " + std::to_string(r));
    }
    if (!std::isfinite(nu)) throw ValidationError("bessel_k: order must be finite");
    nu = std::abs(nu);
    if (r > 745.0) return 0.0;

    if (detail::is_half_integer(nu)) {
        const auto m = static_cast<unsigned>(std::floor(nu));
        // sum_k c_k (2r)^{-k} = r^{-m} * half_integer_poly(m, r)
        return std::sqrt(std::numbers::pi / (2.0 * r)) * std::exp(-r) *
               detail::half_integer_poly(m, r) / std::pow(r, static_cast<double>(m));
    }
    return detail::bessel_k_general(nu, r);
}

} // namespace kme

#endif // KME_BESSEL_HPP
