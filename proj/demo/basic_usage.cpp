// Embeds two small samples, compares them, pushes one through x -> x^2 and
// compresses a larger expansion with the reduced-set method.

#include <kme/kme.hpp>

#include <iostream>

int main() {
    using namespace kme;

    const Kernel k = Kernel::gaussian(1.0);
    const Embedding p(k, WeightedSample::scalar({{0.0, 0.5}, {1.0, 0.5}}));
    const Embedding q(k, WeightedSample::scalar({{0.5, 1.0}}));
    std::cout << "<p, q>      = " << inner(p, q) << '\n';
    std::cout << "||p - q||   = " << rkhs_dist(p, q) << '\n';

    // Z = X^2, embedded with a Matérn kernel on the output space.
    const PointMap square = PointMap::scalar([](double x) { return x * x; }, "square");
    const Embedding pz = pushforward(p, square, Kernel::matern(2.0));
    std::cout << "mu[X^2]     = " << pz.kernel().describe() << " over " << pz.size() << " points\n";

    // 2000 Gaussian draws, reduced to 40 points with re-fitted weights.
    const Embedding big(k, sample_gaussian(GaussianSpec(3.0, 0.5), 2000, 42));
    const ReducedSet r = reduce_detailed(big, ReduceConfig{40, 1e-6, SubsetStrategy::random_subsample, 7});
    std::cout << "reduced     : 2000 -> " << r.embedding.size() << " points, error "
              << reduction_error(big, r.embedding) << ", sum|w| = " << r.abs_weight_sum << '\n';

    // Product of two independent variables, three ways.
    const WeightedSample xs = sample_gaussian(GaussianSpec(3.0, 0.5), 200, 1);
    const WeightedSample ys = sample_gaussian(GaussianSpec(4.0, 0.5), 200, 2);
    const TwoArgProblem prob{xs, ys, BinaryMap::multiply(), Kernel::gaussian(2.5)};
    const Embedding diag = diagonal_estimator(prob);
    const Embedding ustat = ustat_estimator(prob);
    std::cout << "||mu1 - mu2|| = " << rkhs_dist(diag, ustat) << '\n';

    std::cout << "\nserialized p:\n" << to_text(p);
}
