#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using kme::Embedding;
using kme::Kernel;
using kme::WeightedSample;
using kme::testing::random_expansion;
using kme::testing::rel_diff;

TEST(Embedding, InnerProductExamples) {
    const Kernel g = Kernel::gaussian(1.0);
    EXPECT_DOUBLE_EQ(kme::inner(Embedding(g, WeightedSample::scalar({{0.3, 1.0}})),
                                Embedding(g, WeightedSample::scalar({{0.3, 1.0}}))),
                     1.0);
    const Kernel p = Kernel::polynomial(1);
    EXPECT_DOUBLE_EQ(kme::inner(Embedding(p, WeightedSample::scalar({{1, 1.0}})),
                                Embedding(p, WeightedSample::scalar({{2, 1.0}}))),
                     3.0);
    const Embedding a(g, WeightedSample::scalar({{0, 0.5}, {1, 0.5}}));
    const Embedding b(g, WeightedSample::scalar({{0, 1.0}}));
    EXPECT_NEAR(kme::inner(a, b), 0.5 + 0.5 * std::exp(-0.5), 1e-15);
    EXPECT_NEAR(kme::inner(a, b), 0.80326532985631671, 1e-15);
}

TEST(Embedding, DistanceExamples) {
    const Kernel p = Kernel::polynomial(1);
    const Embedding a(p, WeightedSample::scalar({{1, 1.0}}));
    const Embedding b(p, WeightedSample::scalar({{2, 1.0}}));
    EXPECT_DOUBLE_EQ(kme::rkhs_dist2(a, b), 1.0);
    EXPECT_EQ(kme::rkhs_dist2(a, a), 0.0);
    const Kernel g = Kernel::gaussian(1.0);
    EXPECT_NEAR(kme::rkhs_dist2(Embedding(g, WeightedSample::scalar({{0, 1.0}})),
                                Embedding(g, WeightedSample::scalar({{1, 1.0}}))),
                2.0 - 2.0 * std::exp(-0.5), 1e-15);
}

TEST(Embedding, RejectsMismatchedKernels) {
    const Embedding a(Kernel::gaussian(1.0), WeightedSample::scalar({{0, 1.0}}));
    const Embedding b(Kernel::gaussian(2.0), WeightedSample::scalar({{0, 1.0}}));
    EXPECT_THROW(kme::inner(a, b), kme::ValidationError);
    EXPECT_THROW(kme::rkhs_dist2(a, b), kme::ValidationError);
    EXPECT_THROW(Embedding(Kernel::gaussian(1.0, 2), WeightedSample::scalar({{0, 1.0}})), kme::ValidationError);
}

TEST(Embedding, EmptyExpansionIsZero) {
    const Embedding z(Kernel::gaussian(1.0), WeightedSample(1, {}, {}));
    const Embedding a(Kernel::gaussian(1.0), WeightedSample::scalar({{0, 2.0}}));
    EXPECT_EQ(kme::rkhs_norm2(z), 0.0);
    EXPECT_DOUBLE_EQ(kme::rkhs_dist2(a, z), 4.0);
}

TEST(Embedding, MetricProperties) {
    kme::Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        const Kernel k = t % 2 ? Kernel::gaussian(0.9, 2) : Kernel::matern(2.0, 2);
        const Embedding a(k, random_expansion(rng, 6, 2));
        const Embedding b(k, random_expansion(rng, 4, 2));
        const Embedding c(k, random_expansion(rng, 5, 2));
        const double ab = kme::rkhs_dist(a, b), bc = kme::rkhs_dist(b, c), ac = kme::rkhs_dist(a, c);
        EXPECT_LE(ac, ab + bc + 1e-12);
        EXPECT_NEAR(kme::rkhs_dist2(a, b), kme::rkhs_dist2(b, a), 1e-14);
        EXPECT_NEAR(kme::inner(a, b), kme::inner(b, a), 1e-14);
        EXPECT_LE(std::abs(kme::inner(a, b)), kme::rkhs_norm(a) * kme::rkhs_norm(b) + 1e-12);
    }
}

TEST(Embedding, NegativeRoundoffIsClamped) {
    // The same measure written twice: the distance must come out as exactly 0.
    const Kernel k = Kernel::gaussian(0.3);
    const Embedding a(k, WeightedSample::scalar({{0.1, 1.0 / 3}, {0.2, 1.0 / 3}, {0.3, 1.0 / 3}}));
    const Embedding b(k, WeightedSample::scalar({{0.3, 1.0 / 3}, {0.1, 1.0 / 3}, {0.2, 1.0 / 3}}));
    EXPECT_GE(kme::rkhs_dist2(a, b), 0.0);
    EXPECT_LT(kme::rkhs_dist2(a, b), 1e-15);
    EXPECT_EQ(kme::combine_dist2(1.0, 1.0 + 1e-12, 1.0), 0.0);
    EXPECT_THROW(kme::combine_dist2(1.0, 1.1, 1.0), kme::DiagnosticsError);
}

TEST(Embedding, PushforwardExamples) {
    const Kernel g = Kernel::gaussian(1.0);
    const Embedding e(g, WeightedSample::scalar({{1, 0.5}, {2, 0.5}}));
    EXPECT_EQ(kme::pushforward(e, kme::PointMap::identity(1), g).expansion(), e.expansion());
    const auto square = kme::PointMap::scalar([](double x) { return x * x; });
    const Embedding z = kme::pushforward(e, square, g);
    EXPECT_EQ(z.expansion(), WeightedSample::scalar({{1, 0.5}, {4, 0.5}}));
    EXPECT_THROW(kme::pushforward(e, square, Kernel::gaussian(1.0, 2)), kme::ValidationError);
}

TEST(Embedding, PullbackKernelExamples) {
    const Kernel kz = Kernel::gaussian(1.0);
    const Kernel id = kme::pullback_kernel(kz, kme::PointMap::identity(1), 1);
    for (double y : {-1.0, 0.0, 2.5}) EXPECT_EQ(id(0.5, y), kz(0.5, y));
    const Kernel doubled = kme::pullback_kernel(kz, kme::PointMap::scalar([](double x) { return 2 * x; }), 1);
    EXPECT_NEAR(doubled(0.0, 1.0), std::exp(-2.0), 1e-15);
    EXPECT_THROW(kme::pullback_kernel(kz, kme::PointMap::identity(1), 2), kme::ValidationError);

    kme::Rng rng(8);
    const auto cube = kme::PointMap::scalar([](double x) { return x * x * x; });
    const Kernel pb = kme::pullback_kernel(Kernel::matern(2.0), cube, 1);
    for (int t = 0; t < 20; ++t) {
        const auto s = random_expansion(rng, 12, 1);
        const Eigen::MatrixXd g = kme::gram(pb, s.points());
        EXPECT_GE(kme::min_eigenvalue(g), -1e-8 * g.diagonal().maxCoeff());
    }
}

TEST(Embedding, PushforwardDistanceEqualsPullbackDistance) {
    kme::Rng rng(99);
    const auto square = kme::PointMap::scalar([](double x) { return x * x; }, "square");
    const auto affine = kme::PointMap::scalar([](double x) { return 2 * x + 1; }, "affine");
    for (int t = 0; t < 40; ++t) {
        const auto& f = t % 2 ? square : affine;
        const Kernel kz = t % 4 < 2 ? Kernel::gaussian(1.2) : Kernel::matern(2.0);
        const Kernel kx = Kernel::laplacian(1.0);  // irrelevant to either side
        const Embedding a(kx, random_expansion(rng, 5, 1));
        const Embedding b(kx, random_expansion(rng, 5, 1));
        const double lhs = kme::rkhs_dist2(kme::pushforward(a, f, kz), kme::pushforward(b, f, kz));
        const Kernel pb = kme::pullback_kernel(kz, f, 1);
        const double rhs = kme::rkhs_dist2(Embedding(pb, a.expansion()), Embedding(pb, b.expansion()));
        EXPECT_LT(rel_diff(lhs, rhs), 1e-10);
    }
}

TEST(Embedding, TensorProductLayout) {
    const Kernel g = Kernel::gaussian(1.0);
    const Embedding ex(g, WeightedSample::scalar({{1.0, 0.3}}));
    const Embedding ey(g, WeightedSample::scalar({{2.0, 0.4}, {3.0, 0.6}}));
    const Embedding t = kme::tensor_product(ex, ey);
    EXPECT_EQ(t.expansion(), WeightedSample(2, {1.0, 2.0, 1.0, 3.0}, {0.3 * 0.4, 0.3 * 0.6}));
    EXPECT_EQ(t.kernel(), Kernel::product(g, g));
}

TEST(Embedding, TensorNormsFactorize) {
    kme::Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const Embedding ex(Kernel::gaussian(0.8), random_expansion(rng, 3, 1));
        const Embedding ey(Kernel::matern(2.0, 2), random_expansion(rng, 3, 2));
        const Embedding xy = kme::tensor_product(ex, ey);
        EXPECT_LT(rel_diff(kme::rkhs_norm2(xy), kme::rkhs_norm2(ex) * kme::rkhs_norm2(ey)), 1e-10);
    }
}

TEST(Embedding, ProductErrorBound) {
    // ||ex (x) ey - mx (x) my|| <= ||mx|| ||ey - my|| + ||my|| ||ex - mx|| + ||ex - mx|| ||ey - my||
    kme::Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        const Kernel kx = Kernel::gaussian(0.5 + rng.uniform_open0());
        const Kernel ky = Kernel::matern(2.0);
        const Embedding ex(kx, random_expansion(rng, 1 + rng.below(6), 1));
        const Embedding mx(kx, random_expansion(rng, 1 + rng.below(6), 1));
        const Embedding ey(ky, random_expansion(rng, 1 + rng.below(6), 1));
        const Embedding my(ky, random_expansion(rng, 1 + rng.below(6), 1));
        const double lhs = kme::rkhs_dist(kme::tensor_product(ex, ey), kme::tensor_product(mx, my));
        const double ex_err = kme::rkhs_dist(ex, mx), ey_err = kme::rkhs_dist(ey, my);
        const double rhs = kme::rkhs_norm(mx) * ey_err + kme::rkhs_norm(my) * ex_err + ex_err * ey_err;
        EXPECT_LE(lhs, rhs + 1e-8);
    }
}

TEST(Embedding, NarrowKernelApproachesMonteCarlo) {
    // As sigma -> 0 the pushed-forward embedding evaluated at a point returns
    // the weight sitting there, i.e. the empirical measure.
    const Embedding e(Kernel::gaussian(1e-4), WeightedSample::scalar({{0.0, 0.25}, {1.0, 0.75}}));
    auto eval_at = [&](double z) {
        double v = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) v += e.expansion().weight(i) * e.kernel()(e.expansion().point(i)[0], z);
        return v;
    };
    EXPECT_NEAR(eval_at(0.0), 0.25, 1e-12);
    EXPECT_NEAR(eval_at(1.0), 0.75, 1e-12);
    EXPECT_NEAR(eval_at(0.5), 0.0, 1e-12);
    // and ||mu||^2 tends to sum w_i^2
    EXPECT_NEAR(kme::rkhs_norm2(e), 0.25 * 0.25 + 0.75 * 0.75, 1e-12);
}

TEST(Embedding, BilinearIsBlockSizeIndependent) {
    kme::Rng rng(3);
    const Kernel k = Kernel::gaussian(0.5);
    const Embedding a(k, random_expansion(rng, 300, 1));
    const Embedding b(k, random_expansion(rng, 200, 1));
    const Eigen::MatrixXd g = kme::gram(k, a.expansion().points(), b.expansion().points());
    const Eigen::Map<const Eigen::VectorXd> wa(a.expansion().weights().data(), 300);
    const Eigen::Map<const Eigen::VectorXd> wb(b.expansion().weights().data(), 200);
    EXPECT_NEAR(kme::inner(a, b), wa.dot(g * wb), 1e-12);
}
