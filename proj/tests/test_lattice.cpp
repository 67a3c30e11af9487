#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using kme::Embedding;
using kme::Kernel;
using kme::LatticeExpansion;

TEST(Lattice, ReproducesLowOrderMoments) {
    kme::Rng rng(2);
    const auto s = kme::testing::random_expansion(rng, 50, 1);
    LatticeExpansion lat(0.1, 6);
    lat.add(s);
    const auto nodes = lat.to_sample();
    for (int p = 0; p < 6; ++p) {
        double direct = 0.0, on_lattice = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) direct += s.weight(i) * std::pow(s.coords()[i], p);
        for (std::size_t i = 0; i < nodes.size(); ++i) on_lattice += nodes.weight(i) * std::pow(nodes.coords()[i], p);
        EXPECT_NEAR(on_lattice, direct, 1e-10 * (1.0 + std::abs(direct))) << "moment " << p;
    }
}

TEST(Lattice, PointOnNodeStaysPut) {
    LatticeExpansion lat(0.5, 6);
    lat.add(1.5, 2.0);
    const auto nodes = lat.to_sample();
    ASSERT_EQ(nodes.size(), 1u);
    EXPECT_DOUBLE_EQ(nodes.coords()[0], 1.5);
    EXPECT_DOUBLE_EQ(nodes.weight(0), 2.0);
}

TEST(Lattice, DistancesMatchDirectGramSums) {
    kme::Rng rng(31);
    for (int t = 0; t < 10; ++t) {
        const double sigma = 0.3 + rng.uniform_open0();
        const Kernel k = Kernel::gaussian(sigma);
        const auto a = kme::sample_gaussian(kme::GaussianSpec(12.0, 2.0), 300, 100 + t);
        const auto b = kme::sample_gaussian(kme::GaussianSpec(12.2, 2.0), 200, 200 + t);
        LatticeExpansion la(sigma / 48.0), lb(sigma / 48.0);
        la.add(a);
        lb.add(b);
        const double direct = kme::rkhs_dist2(Embedding(k, a), Embedding(k, b));
        EXPECT_NEAR(kme::lattice_dist2(la, lb, k), direct, 1e-9 * direct + 1e-14);
        EXPECT_NEAR(kme::lattice_inner(la, lb, k), kme::inner(Embedding(k, a), Embedding(k, b)), 1e-10);
    }
}

TEST(Lattice, MaternKernelAlsoWorks) {
    const Kernel k = Kernel::matern(3.0);
    const auto a = kme::sample_gaussian(kme::GaussianSpec(0.0, 1.0), 200, 1);
    const auto b = kme::sample_gaussian(kme::GaussianSpec(0.1, 1.0), 200, 2);
    LatticeExpansion la(1.0 / 64.0), lb(1.0 / 64.0);
    la.add(a);
    lb.add(b);
    const double direct = kme::rkhs_dist2(Embedding(k, a), Embedding(k, b));
    EXPECT_NEAR(kme::lattice_dist2(la, lb, k) / direct, 1.0, 1e-5);
}

TEST(Lattice, IdenticalInputsGiveZero) {
    const auto a = kme::sample_gaussian(kme::GaussianSpec(3.0, 1.0), 100, 3);
    LatticeExpansion la(0.01), lb(0.01);
    la.add(a);
    lb.add(a);
    EXPECT_EQ(kme::lattice_dist2(la, lb, Kernel::gaussian(0.5)), 0.0);
    EXPECT_EQ(kme::lattice_dist2(LatticeExpansion(0.01), LatticeExpansion(0.01), Kernel::gaussian(0.5)), 0.0);
}

TEST(Lattice, Grows) {
    LatticeExpansion lat(0.01, 4);
    lat.add(0.0, 1.0);
    lat.add(100.0, 1.0);
    lat.add(-100.0, 1.0);
    const auto nodes = lat.to_sample();
    double total = 0.0;
    for (double w : nodes.weights()) total += w;
    EXPECT_NEAR(total, 3.0, 1e-12);
}

TEST(Lattice, Validation) {
    EXPECT_THROW(LatticeExpansion(0.0), kme::ValidationError);
    EXPECT_THROW(LatticeExpansion(0.1, 0), kme::ValidationError);
    LatticeExpansion a(0.1), b(0.2);
    a.add(0.0, 1.0);
    b.add(0.0, 1.0);
    EXPECT_THROW(kme::lattice_dist2(a, b, Kernel::gaussian(1.0)), kme::ValidationError);
    EXPECT_THROW(kme::lattice_dist2(a, a, Kernel::polynomial(2)), kme::ValidationError);
    EXPECT_THROW(kme::lattice_dist2(a, a, Kernel::gaussian(1.0, 2)), kme::ValidationError);
    EXPECT_THROW(a.add(std::nan(""), 1.0), kme::ValidationError);
}
