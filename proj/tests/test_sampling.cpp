#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using kme::GaussianSpec;
using kme::WeightedSample;

TEST(Sampling, UniformWeights) {
    const WeightedSample s = kme::sample_gaussian(GaussianSpec(0.0, 1.0), 3, 1);
    ASSERT_EQ(s.size(), 3u);
    for (double w : s.weights()) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
}

TEST(Sampling, DeterministicPerSeed) {
    const GaussianSpec spec(3.0, 0.5);
    EXPECT_EQ(kme::sample_gaussian(spec, 100, 9), kme::sample_gaussian(spec, 100, 9));
    EXPECT_NE(kme::sample_gaussian(spec, 100, 9), kme::sample_gaussian(spec, 100, 10));
}

TEST(Sampling, Moments) {
    const WeightedSample s = kme::sample_gaussian(GaussianSpec(3.0, 0.5), 100000, 42);
    double mean = 0.0;
    for (double x : s.coords()) mean += x;
    mean /= static_cast<double>(s.size());
    double var = 0.0;
    for (double x : s.coords()) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(s.size() - 1));
    EXPECT_NEAR(mean, 3.0, 0.01);
    EXPECT_NEAR(sd, 0.5, 0.01);
}

TEST(Sampling, MultivariateCoordinatesAreIndependent) {
    const WeightedSample s = kme::sample_gaussian(GaussianSpec({1.0, -2.0}, {2.0, 0.1}), 50000, 3);
    ASSERT_EQ(s.dim(), 2u);
    double m0 = 0, m1 = 0, c = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        m0 += s.point(i)[0];
        m1 += s.point(i)[1];
    }
    m0 /= 50000.0;
    m1 /= 50000.0;
    for (std::size_t i = 0; i < s.size(); ++i) c += (s.point(i)[0] - m0) * (s.point(i)[1] - m1);
    c /= 50000.0 * 2.0 * 0.1;
    EXPECT_NEAR(m0, 1.0, 0.03);
    EXPECT_NEAR(m1, -2.0, 0.0015);
    EXPECT_NEAR(c, 0.0, 0.02);
}

TEST(Sampling, InvalidSpecs) {
    EXPECT_THROW(GaussianSpec(0.0, 0.0), kme::ValidationError);
    EXPECT_THROW(GaussianSpec(0.0, -1.0), kme::ValidationError);
    EXPECT_THROW(GaussianSpec({0.0}, {1.0, 1.0}), kme::ValidationError);
    EXPECT_THROW(kme::sample_gaussian(GaussianSpec(0.0, 1.0), 0, 1), kme::ValidationError);
    EXPECT_NEAR(GaussianSpec(3.0, 0.5).max_nonpositive_probability(), 9.8658765e-10, 1e-15);
}

TEST(Sampling, WeightedSampleValidation) {
    EXPECT_THROW(WeightedSample(1, {1.0, 2.0}, {1.0}), kme::ValidationError);
    EXPECT_THROW(WeightedSample(0, {}, {}), kme::ValidationError);
    EXPECT_THROW(WeightedSample(1, {std::nan("")}, {1.0}), kme::ValidationError);
    EXPECT_THROW(WeightedSample(1, {1.0}, {INFINITY}), kme::ValidationError);
    EXPECT_NO_THROW(WeightedSample(1, {1.0, 2.0}, {-0.5, 1.5}));
    EXPECT_TRUE(WeightedSample(2, {}, {}).empty());
}

TEST(Sampling, ApplyFn) {
    const auto square = kme::PointMap::scalar([](double x) { return x * x; }, "square");
    EXPECT_EQ(kme::apply_fn(square, WeightedSample::scalar({{1, 0.5}, {2, 0.5}})),
              WeightedSample::scalar({{1, 0.5}, {4, 0.5}}));
    const auto s = WeightedSample::scalar({{1.5, 0.2}, {-3, 0.8}});
    EXPECT_EQ(kme::apply_fn(kme::PointMap::identity(1), s), s);
    const kme::PointMap mult(2, 1, [](std::span<const double> in, std::span<double> out) { out[0] = in[0] * in[1]; });
    EXPECT_EQ(kme::apply_fn(mult, WeightedSample(2, {2, 3}, {1.0})), WeightedSample::scalar({{6, 1.0}}));
    EXPECT_THROW(kme::apply_fn(kme::PointMap::scalar([](double x) { return std::log(x); }),
                               WeightedSample::scalar({{-1.0, 1.0}})),
                 kme::ValidationError);
    EXPECT_THROW(kme::apply_fn(mult, s), kme::ValidationError);
}

TEST(Sampling, DerivedSeedsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 100; ++t) {
        for (std::uint64_t n : {64u, 128u, 4096u}) seen.insert(kme::derive_seed(7, {t, n}));
    }
    EXPECT_EQ(seen.size(), 300u);
    EXPECT_EQ(kme::derive_seed(7, {1, 2}), kme::derive_seed(7, {1, 2}));
    EXPECT_NE(kme::derive_seed(7, {1, 2}), kme::derive_seed(7, {2, 1}));
}

TEST(Sampling, BelowIsInRange) {
    kme::Rng rng(1);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) ++counts[rng.below(5)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}
