#ifndef KME_EXPERIMENTS_HPP
#define KME_EXPERIMENTS_HPP
#pragma once

// Experiment harness: the three two-variable estimators against a large
// U-statistic proxy of the true embedding, convergence-rate fits, a
// single-variable pushforward study under Matérn kernels, and the
// quadrature check that ||mu_a - mu_b||^2 equals an L2 integral of
// h-smoothed expansions.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "embedding.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "format.hpp"
#include "kernels.hpp"
#include "lattice.hpp"
#include "reduced_set.hpp"
#include "sampling.hpp"

namespace kme {

// ---------------------------------------------------------------------------
// Configuration and records

enum class Operation { multiply, divide, power };

inline std::string to_string(Operation op) {
    switch (op) {
    case Operation::multiply: return "multiply";
    case Operation::divide: return "divide";
    case Operation::power: return "power";
    }
    return "?";
}

inline Operation parse_operation(std::string_view s) {
    if (s == "multiply") return Operation::multiply;
    if (s == "divide") return Operation::divide;
    if (s == "power") return Operation::power;
    throw ValidationError("unknown operation '" + std::string(s) + "' (expected multiply, divide or power)");
}

inline BinaryMap binary_map(Operation op) {
    switch (op) {
    case Operation::multiply: return BinaryMap::multiply();
    case Operation::divide: return BinaryMap::divide();
    case Operation::power: return BinaryMap::power();
    }
    throw ValidationError("unknown operation");
}

enum class KernelFamily { gaussian, matern };

struct KernelChoice {
    KernelFamily family = KernelFamily::gaussian;
    /// Gaussian bandwidth; unset selects the median heuristic per variable.
    std::optional<double> sigma;
    /// Output-kernel bandwidth; unset follows `sigma`.
    std::optional<double> sigma_z;
    /// Matérn smoothness (same for k_x, k_y, k_z).
    double matern_s = 2.0;
};

struct ExperimentConfig {
    Operation operation = Operation::multiply;
    GaussianSpec x_spec{3.0, 0.5};
    GaussianSpec y_spec{4.0, 0.5};
    KernelChoice kernel;
    std::vector<std::size_t> n_grid{64, 128, 256, 512, 1024, 2048, 4096};
    double rho = 0.01;
    std::size_t gt_size = 125;
    std::size_t trials = 20;
    std::uint64_t seed = 0;
    std::size_t pilot_size = 500;
    /// Ridge of the reduced-set solves relative to the kernel diagonal,
    /// lambda = ridge_scale * k(x, x).
    double ridge_scale = 1e-4;
    /// Reduced sets with sum |w| above this bound are re-solved with the ridge
    /// raised tenfold until they satisfy it; 0 disables the check.
    double weight_bound = 100.0;
    /// Lattice evaluation (Gaussian k_z): spacing sigma_z / lattice_per_sigma.
    double lattice_per_sigma = 48.0;
    unsigned lattice_order = 6;
    unsigned threads = 1;

    void validate() const {
        x_spec.validate();
        y_spec.validate();
        if (x_spec.dim() != 1 || y_spec.dim() != 1) throw ValidationError("experiment: X and Y must be scalar");
        if (n_grid.empty()) throw ValidationError("experiment: empty N grid");
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            if (n_grid[i] == 0) throw ValidationError("experiment: N values must be >= 1");
            if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ValidationError("experiment: N grid must be strictly increasing");
        }
        if (!(rho > 0.0) || rho > 1.0) throw ValidationError("experiment: rho must lie in (0, 1]");
        if (trials == 0) throw ValidationError("experiment: trials must be >= 1");
        if (gt_size == 0) throw ValidationError("experiment: ground-truth size must be >= 1");
        if (pilot_size < 2) throw ValidationError("experiment: pilot size must be >= 2");
        if (kernel.sigma && !(*kernel.sigma > 0.0)) throw ValidationError("experiment: sigma must be > 0");
        if (kernel.sigma_z && !(*kernel.sigma_z > 0.0)) throw ValidationError("experiment: sigma_z must be > 0");
        if (operation == Operation::power && x_spec.max_nonpositive_probability() > 1e-6) {
            throw ValidationError("experiment: power needs X > 0, but P(X <= 0) = " +
                                  format_double(x_spec.max_nonpositive_probability()) + " exceeds 1e-6");
        }
        if (!(ridge_scale >= 0.0) || !std::isfinite(ridge_scale)) throw ValidationError("experiment: ridge scale must be >= 0");
        if (!(weight_bound >= 0.0)) throw ValidationError("experiment: weight bound must be >= 0");
        if (!(lattice_per_sigma >= 4.0)) throw ValidationError("experiment: lattice resolution too coarse");
    }
};

/// Reduced-set size used for a source of size N.
inline std::size_t reduced_size(double rho, std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9)));
}

struct ErrorRecord {
    std::string operation;
    std::string estimator;
    std::size_t n = 0;
    std::size_t n_reduced = 0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double error = 0.0;

    friend bool operator==(const ErrorRecord&, const ErrorRecord&) = default;
};

inline void sort_records(std::vector<ErrorRecord>& records) {
    std::sort(records.begin(), records.end(), [](const ErrorRecord& a, const ErrorRecord& b) {
        return std::tie(a.operation, a.estimator, a.n, a.trial) < std::tie(b.operation, b.estimator, b.n, b.trial);
    });
}

struct RunMetadata {
    std::string kx, ky, kz;          // kernel descriptors
    std::string evaluation;          // "lattice" or "direct"
    double lattice_spacing = 0.0;
    unsigned lattice_order = 0;
    std::size_t resampled = 0;       // samples redrawn by the division / power guards
    double max_abs_weight_sum = 0.0; // largest sum |w| over all reduced sets
    double max_solver_residual = 0.0;// largest residual / ||rhs|| over all solves
    std::size_t reductions = 0;
    std::size_t ridge_escalations = 0; // re-solves triggered by the weight bound
    double max_ridge = 0.0;
};

struct Figure1Result {
    std::vector<ErrorRecord> records;
    RunMetadata metadata;
};

// ---------------------------------------------------------------------------
// Helpers

/// Median of the pairwise Euclidean distances of the points of `s`.
inline double median_heuristic(const WeightedSample& s) {
    if (s.size() < 2) throw ValidationError("median_heuristic: need at least two points");
    std::vector<double> d;
    d.reserve(s.size() * (s.size() - 1) / 2);
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            double acc = 0.0;
            const auto a = s.point(i);
            const auto b = s.point(j);
            for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
            d.push_back(std::sqrt(acc));
        }
    }
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    double med = d[mid];
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + lower);
    }
    if (!(med > 0.0)) throw ValidationError("median_heuristic: all pilot points coincide");
    return med;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw ValidationError("median of an empty list");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    return m;
}

/// Runs body(i) for i in [0, count) on `threads` workers. Results must be
/// stored per index by the caller, which keeps them thread-count invariant.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(count));
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

namespace detail {

struct GuardedSample {
    WeightedSample sample;
    std::size_t redraws = 0;
};

/// Draws n points, redrawing with a derived seed while `reject` flags a point.
template <typename Reject>
GuardedSample guarded_sample(const GaussianSpec& spec, std::size_t n, std::uint64_t seed, Reject&& reject) {
    GuardedSample out{sample_gaussian(spec, n, seed)};
    constexpr std::size_t kMaxRedraws = 64;
    while (std::any_of(out.sample.coords().begin(), out.sample.coords().end(), reject)) {
        if (++out.redraws > kMaxRedraws) {
            throw ValidationError("experiment: could not draw a sample satisfying the domain guard");
        }
        out.sample = sample_gaussian(spec, n, derive_seed(seed, {0xd1u, out.redraws}));
    }
    return out;
}

struct TrialOutput {
    std::vector<ErrorRecord> records;
    std::size_t resampled = 0;
    double max_abs_weight_sum = 0.0;
    double max_solver_residual = 0.0;
    std::size_t reductions = 0;
    std::size_t ridge_escalations = 0;
    double max_ridge = 0.0;
};

/// reduce_detailed, re-solved with a tenfold larger ridge while sum |w| > bound.
inline ReducedSet bounded_reduce(const Embedding& e, ReduceConfig cfg, double bound, std::size_t& escalations) {
    ReducedSet r = reduce_detailed(e, cfg);
    constexpr int kMaxEscalations = 16;
    for (int i = 0; bound > 0.0 && r.abs_weight_sum > bound; ++i) {
        if (i == kMaxEscalations) {
            throw DiagnosticsError("reduce: sum |w| = " + format_double(r.abs_weight_sum) + " still exceeds " +
                                   format_double(bound) + " at ridge " + format_double(r.ridge));
        }
        cfg.ridge = std::max(r.ridge, 1e-300) * 10.0;
        r = reduce_detailed(e, cfg);
        ++escalations;
    }
    return r;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Two-variable study

/// For each (N, trial): fresh X, Y samples; the diagonal (mu1), U-statistic
/// (mu2) and reduced-set (mu3) estimates of the embedding of f(X, Y); error =
/// RKHS distance to a U-statistic proxy on gt_size points per variable,
/// drawn once per trial. Deterministic in cfg (independent of cfg.threads).
inline Figure1Result run_figure1(const ExperimentConfig& cfg) {
    cfg.validate();
    const BinaryMap f = binary_map(cfg.operation);
    const std::string op_name = to_string(cfg.operation);

    auto x_reject = [&](double x) { return cfg.operation == Operation::power && !(x > 0.0); };
    auto y_reject = [&](double y) { return cfg.operation == Operation::divide && std::abs(y) < 1e-6; };

    // Kernels.
    std::optional<Kernel> kx, ky, kz;
    if (cfg.kernel.family == KernelFamily::gaussian) {
        double sx = 0, sy = 0, sz = 0;
        if (cfg.kernel.sigma) {
            sx = sy = sz = *cfg.kernel.sigma;
        } else {
            const auto px = detail::guarded_sample(cfg.x_spec, cfg.pilot_size, derive_seed(cfg.seed, {0x9170u, 1}), x_reject);
            const auto py = detail::guarded_sample(cfg.y_spec, cfg.pilot_size, derive_seed(cfg.seed, {0x9170u, 2}), y_reject);
            std::vector<double> pz(cfg.pilot_size);
            for (std::size_t i = 0; i < cfg.pilot_size; ++i) {
                f(px.sample.point(i), py.sample.point(i), std::span<double>(&pz[i], 1));
            }
            sx = median_heuristic(px.sample);
            sy = median_heuristic(py.sample);
            sz = median_heuristic(WeightedSample::uniform(1, std::move(pz)));
        }
        kx = Kernel::gaussian(sx);
        ky = Kernel::gaussian(sy);
        kz = Kernel::gaussian(cfg.kernel.sigma_z ? *cfg.kernel.sigma_z : sz);
    } else {
        kx = Kernel::matern(cfg.kernel.matern_s);
        ky = Kernel::matern(cfg.kernel.matern_s);
        kz = Kernel::matern(cfg.kernel.matern_s);
    }

    const bool use_lattice = kz->is_gaussian();
    const double spacing =
        use_lattice ? std::get<GaussianKernel>(kz->variant()).sigma / cfg.lattice_per_sigma : 0.0;

    std::vector<detail::TrialOutput> outputs(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t trial) {
        detail::TrialOutput& out = outputs[trial];
        const std::uint64_t trial_seed = derive_seed(cfg.seed, {trial});

        auto draw = [&](const GaussianSpec& spec, std::size_t n, std::uint64_t seed, auto&& reject) {
            auto g = detail::guarded_sample(spec, n, seed, reject);
            out.resampled += g.redraws;
            return std::move(g.sample);
        };

        const WeightedSample gx = draw(cfg.x_spec, cfg.gt_size, derive_seed(trial_seed, {1}), x_reject);
        const WeightedSample gy = draw(cfg.y_spec, cfg.gt_size, derive_seed(trial_seed, {2}), y_reject);

        std::optional<LatticeExpansion> proxy_lattice;
        std::optional<Embedding> proxy;
        double proxy_norm2 = 0.0;
        if (use_lattice) {
            proxy_lattice.emplace(spacing, cfg.lattice_order);
            accumulate_product(gx, gy, f, *proxy_lattice);
        } else {
            proxy = ustat_estimator(TwoArgProblem{gx, gy, f, *kz});
            proxy_norm2 = rkhs_norm2(*proxy);
        }

        auto error_of_embedding = [&](const Embedding& est) {
            if (use_lattice) {
                LatticeExpansion lat(spacing, cfg.lattice_order);
                lat.add(est.expansion());
                return std::sqrt(lattice_dist2(lat, *proxy_lattice, *kz));
            }
            const double ab = detail::bilinear(*kz, est.expansion(), proxy->expansion());
            return std::sqrt(combine_dist2(rkhs_norm2(est), ab, proxy_norm2));
        };
        auto error_of_product = [&](const WeightedSample& xs, const WeightedSample& ys) {
            if (use_lattice) {
                LatticeExpansion lat(spacing, cfg.lattice_order);
                accumulate_product(xs, ys, f, lat);
                return std::sqrt(lattice_dist2(lat, *proxy_lattice, *kz));
            }
            return error_of_embedding(reduced_estimator(TwoArgProblem{xs, ys, f, *kz}));
        };
        auto record = [&](const char* est, std::size_t n, std::size_t n_red, double err) {
            if (!std::isfinite(err) || err < 0.0) throw DiagnosticsError("experiment: invalid error value");
            out.records.push_back(ErrorRecord{op_name, est, n, n_red, trial, trial_seed, err});
        };

        for (std::size_t n : cfg.n_grid) {
            const WeightedSample xs = draw(cfg.x_spec, n, derive_seed(trial_seed, {3, n}), x_reject);
            const WeightedSample ys = draw(cfg.y_spec, n, derive_seed(trial_seed, {4, n}), y_reject);

            record("mu1", n, n, error_of_embedding(diagonal_estimator(TwoArgProblem{xs, ys, f, *kz})));
            if (!use_lattice) {
                ustat_estimator(TwoArgProblem{xs, ys, f, *kz});  // validates inputs and the size guard
            }
            record("mu2", n, n, error_of_product(xs, ys));

            const std::size_t n_red = reduced_size(cfg.rho, n);
            auto ridge_for = [&](const Kernel& k, const WeightedSample& s) {
                return cfg.ridge_scale * k.eval_unchecked(s.point(0), s.point(0));
            };
            const ReducedSet rx = detail::bounded_reduce(
                Embedding(*kx, xs),
                ReduceConfig{n_red, ridge_for(*kx, xs), SubsetStrategy::random_subsample, derive_seed(trial_seed, {5, n})},
                cfg.weight_bound, out.ridge_escalations);
            const ReducedSet ry = detail::bounded_reduce(
                Embedding(*ky, ys),
                ReduceConfig{n_red, ridge_for(*ky, ys), SubsetStrategy::random_subsample, derive_seed(trial_seed, {6, n})},
                cfg.weight_bound, out.ridge_escalations);
            for (const ReducedSet* r : {&rx, &ry}) {
                out.max_abs_weight_sum = std::max(out.max_abs_weight_sum, r->abs_weight_sum);
                out.max_solver_residual =
                    std::max(out.max_solver_residual, r->max_residual / std::max(r->rhs_norm, 1e-300));
                out.max_ridge = std::max(out.max_ridge, r->ridge);
                ++out.reductions;
            }
            record("mu3", n, n_red, error_of_product(rx.embedding.expansion(), ry.embedding.expansion()));
        }
    });

    Figure1Result result;
    result.metadata.kx = kx->describe();
    result.metadata.ky = ky->describe();
    result.metadata.kz = kz->describe();
    result.metadata.evaluation = use_lattice ? "lattice" : "direct";
    result.metadata.lattice_spacing = spacing;
    result.metadata.lattice_order = use_lattice ? cfg.lattice_order : 0;
    for (auto& o : outputs) {
        result.records.insert(result.records.end(), o.records.begin(), o.records.end());
        result.metadata.resampled += o.resampled;
        result.metadata.max_abs_weight_sum = std::max(result.metadata.max_abs_weight_sum, o.max_abs_weight_sum);
        result.metadata.max_solver_residual = std::max(result.metadata.max_solver_residual, o.max_solver_residual);
        result.metadata.reductions += o.reductions;
        result.metadata.ridge_escalations += o.ridge_escalations;
        result.metadata.max_ridge = std::max(result.metadata.max_ridge, o.max_ridge);
    }
    sort_records(result.records);
    return result;
}

// ---------------------------------------------------------------------------
// Single-variable pushforward study

struct PushforwardStudyConfig {
    GaussianSpec x_spec{3.0, 0.5};
    PointMap f = PointMap::scalar([](double x) { return x * x; }, "square");
    Kernel kx = Kernel::matern(1.0, 1);
    Kernel kz = Kernel::matern(2.0, 1);
    std::vector<std::size_t> n_grid{64, 256, 1024};
    std::size_t gt_size = 4096;
    std::size_t trials = 20;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Error of sum_i (1/N) kz(f(x_i), .) against an i.i.d. proxy of gt_size
/// points ("mu"), alongside the input-space error under kx ("mu_x").
inline std::vector<ErrorRecord> run_pushforward_study(const PushforwardStudyConfig& cfg) {
    cfg.x_spec.validate();
    if (cfg.x_spec.dim() != cfg.f.in_dim() || cfg.kx.dim() != cfg.f.in_dim() || cfg.kz.dim() != cfg.f.out_dim()) {
        throw ValidationError("pushforward study: dimensions of X, f, kx and kz do not agree");
    }
    if (cfg.n_grid.empty() || cfg.trials == 0 || cfg.gt_size == 0) {
        throw ValidationError("pushforward study: empty grid, zero trials or zero ground-truth size");
    }
    std::vector<std::vector<ErrorRecord>> per_trial(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t trial) {
        const std::uint64_t trial_seed = derive_seed(cfg.seed, {trial});
        const WeightedSample gt = sample_gaussian(cfg.x_spec, cfg.gt_size, derive_seed(trial_seed, {1}));
        const Embedding proxy_x(cfg.kx, gt);
        const Embedding proxy_z = pushforward(proxy_x, cfg.f, cfg.kz);
        const double px2 = rkhs_norm2(proxy_x);
        const double pz2 = rkhs_norm2(proxy_z);
        for (std::size_t n : cfg.n_grid) {
            const Embedding ex(cfg.kx, sample_gaussian(cfg.x_spec, n, derive_seed(trial_seed, {3, n})));
            const Embedding ez = pushforward(ex, cfg.f, cfg.kz);
            const double ez_err = std::sqrt(
                combine_dist2(rkhs_norm2(ez), detail::bilinear(cfg.kz, ez.expansion(), proxy_z.expansion()), pz2));
            const double ex_err = std::sqrt(
                combine_dist2(rkhs_norm2(ex), detail::bilinear(cfg.kx, ex.expansion(), proxy_x.expansion()), px2));
            per_trial[trial].push_back(ErrorRecord{cfg.f.name(), "mu", n, n, trial, trial_seed, ez_err});
            per_trial[trial].push_back(ErrorRecord{cfg.f.name(), "mu_x", n, n, trial, trial_seed, ex_err});
        }
    });
    std::vector<ErrorRecord> records;
    for (auto& v : per_trial) records.insert(records.end(), v.begin(), v.end());
    sort_records(records);
    return records;
}

// ---------------------------------------------------------------------------
// Rate fitting

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
    std::vector<std::size_t> excluded;  // N values dropped for a zero median
};

/// Median error per N for one estimator (and optionally one operation).
inline std::map<std::size_t, double> median_errors(const std::vector<ErrorRecord>& records, std::string_view estimator,
                                                   std::optional<std::string_view> operation = std::nullopt) {
    std::map<std::size_t, std::vector<double>> by_n;
    for (const auto& r : records) {
        if (r.estimator != estimator) continue;
        if (operation && r.operation != *operation) continue;
        by_n[r.n].push_back(r.error);
    }
    std::map<std::size_t, double> out;
    for (auto& [n, errs] : by_n) out[n] = median(std::move(errs));
    return out;
}

/// Least squares of log(median error) on log N.
inline RateFit fit_log_log(const std::map<std::size_t, double>& medians) {
    RateFit fit;
    // Logs are taken relative to the first kept point, which keeps simple
    // ratios (e.g. a halving per fourfold N) exact.
    std::vector<double> xs, ys;
    double n0 = 0.0, m0 = 0.0;
    for (const auto& [n, m] : medians) {
        if (!(m > 0.0)) {
            fit.excluded.push_back(n);
            continue;
        }
        if (xs.empty()) {
            n0 = static_cast<double>(n);
            m0 = m;
        }
        xs.push_back(std::log(static_cast<double>(n) / n0));
        ys.push_back(std::log(m / m0));
    }
    if (xs.size() < 2) throw ValidationError("estimate_rate: need at least two distinct N with nonzero median error");
    const double k = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    const double shifted = my - fit.slope * mx;
    fit.intercept = std::log(m0) + shifted - fit.slope * std::log(n0);
    double ss_res = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (shifted + fit.slope * xs[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.points = xs.size();
    return fit;
}

inline RateFit estimate_rate(const std::vector<ErrorRecord>& records, std::string_view estimator,
                             std::optional<std::string_view> operation = std::nullopt) {
    const auto medians = median_errors(records, estimator, operation);
    if (medians.size() < 2) {
        throw ValidationError("estimate_rate: estimator '" + std::string(estimator) + "' has fewer than two distinct N");
    }
    return fit_log_log(medians);
}

// ---------------------------------------------------------------------------
// Quadrature identity for Matérn kernels

struct Lemma3Result {
    double lhs = 0.0;  // ||mu_a - mu_b||^2 from Gram matrices
    double rhs = 0.0;  // (2 pi)^{-1/2} * trapezoid integral of (mu_a^h - mu_b^h)^2
    double relative_gap = 0.0;
    std::size_t nodes = 0;
};

/// For the 1-D Matérn kernel of even smoothness s2, the convolution square
/// root is the Matérn kernel h of smoothness s2/2, and
///   ||mu_a - mu_b||^2 = (2 pi)^{-1/2} int (sum_i w_i h(z - a_i) - sum_j v_j h(z - b_j))^2 dz.
inline Lemma3Result lemma3_check(const Embedding& a, const Embedding& b, double grid_step, double margin = 40.0) {
    detail::require_same_kernel(a, b, "lemma3_check");
    const auto* m = std::get_if<MaternKernel>(&a.kernel().variant());
    if (!m || m->dim != 1 || m->normalized) {
        throw ValidationError("lemma3_check: needs an unnormalized one-dimensional Matérn kernel");
    }
    const double s2 = m->s;
    if (s2 != std::round(s2) || std::fmod(s2, 2.0) != 0.0) {
        throw ValidationError("lemma3_check: s2 = " + format_double(s2) + " must be an even integer");
    }
    if (!(s2 / 2.0 > 0.5)) throw ValidationError("lemma3_check: s2/2 must exceed d/2");
    if (!(grid_step > 0.0) || !(margin > 0.0)) throw ValidationError("lemma3_check: grid step and margin must be > 0");

    const Kernel h = Kernel::matern(s2 / 2.0, 1);
    const auto& hk = std::get<MaternKernel>(h.variant());

    // The integrand has kinks at the expansion points when s2 = 2, so they
    // become breakpoints of the trapezoid grid; each piece gets equal steps
    // no longer than grid_step.
    std::vector<double> breaks;
    for (const auto* e : {&a, &b}) {
        for (double z : e->expansion().coords()) breaks.push_back(z);
    }
    if (breaks.empty()) breaks.push_back(0.0);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    breaks.insert(breaks.begin(), breaks.front() - margin);
    breaks.push_back(breaks.back() + margin);

    std::size_t total_steps = 0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        total_steps += static_cast<std::size_t>(std::ceil((breaks[p + 1] - breaks[p]) / grid_step));
    }
    if (total_steps > 500'000'000) throw ValidationError("lemma3_check: grid too fine");

    const auto& sa = a.expansion();
    const auto& sb = b.expansion();
    auto diff2 = [&](double z) {
        double v = 0.0;
        for (std::size_t i = 0; i < sa.size(); ++i) v += sa.weight(i) * hk.radial(std::abs(z - sa.coords()[i]));
        for (std::size_t j = 0; j < sb.size(); ++j) v -= sb.weight(j) * hk.radial(std::abs(z - sb.coords()[j]));
        return v * v;
    };
    double integral = 0.0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double x0 = breaks[p];
        const double len = breaks[p + 1] - x0;
        const auto n = static_cast<std::size_t>(std::ceil(len / grid_step));
        const double step = len / static_cast<double>(n);
        double piece = 0.5 * (diff2(x0) + diff2(breaks[p + 1]));
        for (std::size_t k = 1; k < n; ++k) piece += diff2(x0 + static_cast<double>(k) * step);
        integral += piece * step;
    }


    Lemma3Result r;
    r.lhs = rkhs_dist2(a, b);
    r.rhs = integral / std::sqrt(2.0 * std::numbers::pi);
    const double gap = std::abs(r.lhs - r.rhs);
    r.relative_gap = r.lhs > 0.0 ? gap / r.lhs : gap;
    r.nodes = total_steps + 1;
    return r;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader = "operation,estimator,N,n_reduced,trial,seed,error";

/// Writes the records sorted by (operation, estimator, N, trial).
inline void write_csv(std::ostream& out, std::vector<ErrorRecord> records) {
    sort_records(records);
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << r.operation << ',' << r.estimator << ',' << r.n << ',' << r.n_reduced << ',' << r.trial << ','
            << r.seed << ',' << format_double(r.error) << '\n';
    }
}

inline void write_csv(const std::vector<ErrorRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_csv(out, records);
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<ErrorRecord> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCsvHeader) {
        throw ValidationError("csv: expected header '" + std::string(kCsvHeader) + "'");
    }
    std::vector<ErrorRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        std::vector<std::string_view> f;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = row.find(',', start);
            f.push_back(row.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (f.size() != 7) throw ValidationError("csv line " + std::to_string(line_no) + ": expected 7 fields");
        try {
            ErrorRecord r;
            r.operation = std::string(f[0]);
            r.estimator = std::string(f[1]);
            r.n = static_cast<std::size_t>(parse_u64(f[2]));
            r.n_reduced = static_cast<std::size_t>(parse_u64(f[3]));
            r.trial = static_cast<std::size_t>(parse_u64(f[4]));
            r.seed = parse_u64(f[5]);
            r.error = parse_double(f[6]);
            if (!std::isfinite(r.error) || r.error < 0.0) throw ValidationError("error must be finite and >= 0");
            out.push_back(std::move(r));
        } catch (const ValidationError& e) {
            throw ValidationError("csv line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<ErrorRecord> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return read_csv(in);
}

} // namespace kme

#endif // KME_EXPERIMENTS_HPP
