#include <kme/bessel.hpp>
#include <kme/error.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

struct Reference {
    double nu, r, value;
};

// 20-digit values from an arbitrary-precision implementation.
constexpr Reference kReference[] = {
    {0.5, 1.0, 0.46106850444789454491},
    {1.5, 1.0, 0.92213700889578908981},
    {0.3, 0.7, 0.6895624897569750944},
    {1.0, 2.0, 0.13986588181652243046},
    {2.7, 5.0, 0.007126248755633331905},
    {0.0, 0.1, 2.4270690247020163532},
    {1.25, 3.0, 0.043539266087495649693},
    {2.0, 0.5, 7.5501835512408694839},
    {0.1, 1.9999, 0.1141442301568080242},
    {3.3, 2.0001, 0.90839184766199709831},
    {0.45, 10.0, 1.7952738415992804127e-5},
};

} // namespace

TEST(Bessel, MatchesHighPrecisionReference) {
    for (const auto& ref : kReference) {
        EXPECT_NEAR(kme::bessel_k(ref.nu, ref.r) / ref.value, 1.0, 1e-13) << "nu=" << ref.nu << " r=" << ref.r;
    }
}

TEST(Bessel, HalfIntegerClosedForms) {
    const double c = std::sqrt(std::numbers::pi / 2.0);
    for (double r : {0.01, 0.3, 1.0, 4.0, 25.0, 300.0}) {
        const double k05 = c * std::exp(-r) / std::sqrt(r);
        EXPECT_NEAR(kme::bessel_k(0.5, r) / k05, 1.0, 1e-14);
        EXPECT_NEAR(kme::bessel_k(1.5, r) / (k05 * (1.0 + 1.0 / r)), 1.0, 1e-14);
        EXPECT_NEAR(kme::bessel_k(2.5, r) / (k05 * (1.0 + 3.0 / r + 3.0 / (r * r))), 1.0, 1e-13);
    }
}

TEST(Bessel, SymmetricInOrder) {
    EXPECT_EQ(kme::bessel_k(-0.5, 1.0), kme::bessel_k(0.5, 1.0));
    EXPECT_EQ(kme::bessel_k(-2.3, 0.8), kme::bessel_k(2.3, 0.8));
}

TEST(Bessel, AgreesWithStandardLibrary) {
    for (double nu : {0.0, 0.2, 0.5, 0.8, 1.0, 1.7, 2.5, 3.9, 6.1}) {
        for (double r : {0.05, 0.5, 1.0, 1.99, 2.01, 3.0, 7.5, 20.0, 60.0}) {
            const double expected = std::cyl_bessel_k(nu, r);
            EXPECT_NEAR(kme::bessel_k(nu, r) / expected, 1.0, 1e-12) << "nu=" << nu << " r=" << r;
        }
    }
}

TEST(Bessel, SatisfiesRecurrence) {
    // K_{nu+1}(r) = K_{nu-1}(r) + (2 nu / r) K_nu(r)
    for (double nu : {1.1, 1.5, 2.25}) {
        for (double r : {0.4, 1.8, 2.2, 9.0}) {
            const double lhs = kme::bessel_k(nu + 1.0, r);
            const double rhs = kme::bessel_k(nu - 1.0, r) + 2.0 * nu / r * kme::bessel_k(nu, r);
            EXPECT_NEAR(lhs / rhs, 1.0, 1e-13);
        }
    }
}

TEST(Bessel, IntegralRepresentation) {
    // K_nu(r) = int_0^inf exp(-r cosh t) cosh(nu t) dt, midpoint rule.
    for (double nu : {0.35, 1.6}) {
        for (double r : {0.9, 3.5}) {
            const double h = 1e-3;
            double sum = 0.0;
            for (double t = 0.5 * h; t < 30.0; t += h) sum += std::exp(-r * std::cosh(t)) * std::cosh(nu * t);
            EXPECT_NEAR(kme::bessel_k(nu, r) / (sum * h), 1.0, 1e-9);
        }
    }
}

TEST(Bessel, UnderflowsToZeroForLargeArguments) {
    EXPECT_EQ(kme::bessel_k(0.5, 800.0), 0.0);
    EXPECT_GT(kme::bessel_k(0.5, 700.0), 0.0);
}

TEST(Bessel, RejectsNonPositiveArguments) {
    EXPECT_THROW(kme::bessel_k(0.5, 0.0), kme::ValidationError);
    EXPECT_THROW(kme::bessel_k(0.5, -1.0), kme::ValidationError);
    EXPECT_THROW(kme::bessel_k(0.5, std::nan("")), kme::ValidationError);
    EXPECT_THROW(kme::bessel_k(std::nan(""), 1.0), kme::ValidationError);
}
