// kme-calc: command-line front end for the experiment harness.
//
//   kme-calc fig1 --op multiply --n-grid 64:4096:x2 --trials 20 --out fig1.csv
//   kme-calc rate --in fig1.csv --estimator mu2
//   kme-calc lemma3 --s2 2 --grid-step 1e-3
//   kme-calc pushforward --n-grid 64,256,1024 --out pf.csv
//   kme-calc dist --a a.txt --b b.txt
//
// Exit status: 0 on success, 1 on invalid input, 2 on I/O failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <kme/kme.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using kme::ValidationError;

// "64:4096:x2" (geometric), "10:50:+10" (arithmetic) or "64,128,256".
std::vector<std::size_t> parse_grid(const std::string& text) {
    std::vector<std::size_t> out;
    if (text.find(':') != std::string::npos) {
        const auto a = text.find(':');
        const auto b = text.find(':', a + 1);
        if (b == std::string::npos) throw ValidationError("--n-grid: expected start:stop:xFACTOR or start:stop:+STEP");
        const auto start = kme::parse_u64(text.substr(0, a));
        const auto stop = kme::parse_u64(text.substr(a + 1, b - a - 1));
        const std::string step = text.substr(b + 1);
        if (step.size() < 2 || (step[0] != 'x' && step[0] != '+')) {
            throw ValidationError("--n-grid: step must look like x2 or +64");
        }
        const auto k = kme::parse_u64(step.substr(1));
        if (start == 0 || (step[0] == 'x' && k < 2) || (step[0] == '+' && k == 0)) {
            throw ValidationError("--n-grid: grid would not increase");
        }
        for (std::uint64_t n = start; n <= stop; n = step[0] == 'x' ? n * k : n + k) out.push_back(n);
    } else {
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto comma = text.find(',', pos);
            out.push_back(kme::parse_u64(text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (out.empty()) throw ValidationError("--n-grid: empty grid");
    return out;
}

nlohmann::json metadata_json(const kme::ExperimentConfig& cfg, const kme::RunMetadata& m, const std::string& sigma) {
    nlohmann::json j;
    j["operation"] = kme::to_string(cfg.operation);
    j["x_spec"] = {{"mean", cfg.x_spec.mean[0]}, {"stddev", cfg.x_spec.stddev[0]}};
    j["y_spec"] = {{"mean", cfg.y_spec.mean[0]}, {"stddev", cfg.y_spec.stddev[0]}};
    j["n_grid"] = cfg.n_grid;
    j["rho"] = cfg.rho;
    j["gt_size"] = cfg.gt_size;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["sigma"] = sigma;
    j["ridge_scale"] = cfg.ridge_scale;
    j["weight_bound"] = cfg.weight_bound;
    j["kx"] = m.kx;
    j["ky"] = m.ky;
    j["kz"] = m.kz;
    j["evaluation"] = m.evaluation;
    if (m.evaluation == "lattice") {
        j["lattice_spacing"] = m.lattice_spacing;
        j["lattice_order"] = m.lattice_order;
    }
    j["resampled"] = m.resampled;
    j["reductions"] = m.reductions;
    j["max_abs_weight_sum"] = m.max_abs_weight_sum;
    j["max_relative_residual"] = m.max_solver_residual;
    j["ridge_escalations"] = m.ridge_escalations;
    j["max_ridge"] = m.max_ridge;
    j["clamped_distances"] = kme::diagnostics::clamped_distances().load();
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw kme::IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw kme::IoError("failed writing '" + path + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel mean embedding calculator"};
    app.require_subcommand(1);

    // fig1
    auto* fig1 = app.add_subcommand("fig1", "Error of the three two-variable estimators versus N");
    std::string op = "multiply", grid = "64:4096:x2", kernel = "gaussian", sigma = "median", out_path;
    std::optional<std::string> sigma_z;
    kme::ExperimentConfig cfg;
    fig1->add_option("--op", op, "multiply | divide | power")->capture_default_str();
    fig1->add_option("--n-grid", grid, "start:stop:xF, start:stop:+S or a comma list")->capture_default_str();
    fig1->add_option("--x-mean", cfg.x_spec.mean[0])->capture_default_str();
    fig1->add_option("--x-std", cfg.x_spec.stddev[0])->capture_default_str();
    fig1->add_option("--y-mean", cfg.y_spec.mean[0])->capture_default_str();
    fig1->add_option("--y-std", cfg.y_spec.stddev[0])->capture_default_str();
    fig1->add_option("--trials", cfg.trials)->capture_default_str();
    fig1->add_option("--rho", cfg.rho, "reduced-set fraction")->capture_default_str();
    fig1->add_option("--gt-size", cfg.gt_size, "points per variable in the ground-truth proxy")->capture_default_str();
    fig1->add_option("--kernel", kernel, "gaussian | matern")->capture_default_str();
    fig1->add_option("--sigma", sigma, "median or a bandwidth")->capture_default_str();
    fig1->add_option("--sigma-z", sigma_z, "output-kernel bandwidth (default: as --sigma)");
    fig1->add_option("--matern-s", cfg.kernel.matern_s)->capture_default_str();
    fig1->add_option("--ridge-scale", cfg.ridge_scale, "reduced-set ridge relative to k(x,x)")->capture_default_str();
    fig1->add_option("--weight-bound", cfg.weight_bound, "bound on sum |w| (0 disables)")->capture_default_str();
    fig1->add_option("--seed", cfg.seed)->capture_default_str();
    fig1->add_option("--threads", cfg.threads)->capture_default_str();
    fig1->add_option("--out", out_path, "CSV output path")->required();

    // rate
    auto* rate = app.add_subcommand("rate", "Log-log slope of median error versus N");
    std::string in_path, estimator = "mu2";
    std::optional<std::string> rate_op;
    rate->add_option("--in", in_path)->required();
    rate->add_option("--estimator", estimator)->capture_default_str();
    rate->add_option("--op", rate_op, "restrict to one operation");

    // lemma3
    auto* lemma3 = app.add_subcommand("lemma3", "Gram versus quadrature form of a Matérn RKHS distance");
    double s2 = 2.0, grid_step = 1e-3, margin = 40.0;
    std::optional<std::string> a_path, b_path;
    lemma3->add_option("--s2", s2)->capture_default_str();
    lemma3->add_option("--grid-step", grid_step)->capture_default_str();
    lemma3->add_option("--margin", margin)->capture_default_str();
    lemma3->add_option("--a", a_path, "1-D sample file (lines: x weight)");
    lemma3->add_option("--b", b_path, "1-D sample file (lines: x weight)");

    // pushforward
    auto* pf = app.add_subcommand("pushforward", "Error of the embedding of X^2 under Matérn kernels");
    kme::PushforwardStudyConfig pcfg;
    std::string pf_grid = "64,256,1024";
    double s1 = 1.0, pf_s2 = 2.0;
    pf->add_option("--n-grid", pf_grid)->capture_default_str();
    pf->add_option("--trials", pcfg.trials)->capture_default_str();
    pf->add_option("--gt-size", pcfg.gt_size)->capture_default_str();
    pf->add_option("--s1", s1, "Matérn smoothness of k_x")->capture_default_str();
    pf->add_option("--s2", pf_s2, "Matérn smoothness of k_z")->capture_default_str();
    pf->add_option("--seed", pcfg.seed)->capture_default_str();
    pf->add_option("--threads", pcfg.threads)->capture_default_str();
    pf->add_option("--out", out_path)->required();

    // dist
    auto* dist = app.add_subcommand("dist", "RKHS distance between two embedding files");
    std::string da, db;
    dist->add_option("--a", da)->required();
    dist->add_option("--b", db)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*fig1) {
            cfg.operation = kme::parse_operation(op);
            cfg.n_grid = parse_grid(grid);
            if (kernel == "gaussian") {
                cfg.kernel.family = kme::KernelFamily::gaussian;
            } else if (kernel == "matern") {
                cfg.kernel.family = kme::KernelFamily::matern;
            } else {
                throw ValidationError("--kernel must be gaussian or matern");
            }
            if (sigma != "median") cfg.kernel.sigma = kme::parse_double(sigma);
            if (sigma_z) cfg.kernel.sigma_z = kme::parse_double(*sigma_z);
            const kme::Figure1Result result = kme::run_figure1(cfg);
            kme::write_csv(result.records, out_path);
            write_text(out_path + ".meta.json", metadata_json(cfg, result.metadata, sigma).dump(2) + "\n");
            if (cfg.weight_bound > 0.0 && result.metadata.ridge_escalations > 0) {
                std::cerr << "note: " << result.metadata.ridge_escalations
                          << " reduced-set solves exceeded the weight bound and were re-solved with a larger ridge\n";
            }
            if (result.metadata.resampled > 0) {
                std::cerr << "note: " << result.metadata.resampled << " samples redrawn by the domain guard\n";
            }
        } else if (*rate) {
            const auto records = kme::read_csv(in_path);
            std::optional<std::string_view> filter;
            if (rate_op) filter = *rate_op;
            const kme::RateFit fit = kme::estimate_rate(records, estimator, filter);
            for (std::size_t n : fit.excluded) std::cerr << "note: N=" << n << " excluded (zero median error)\n";
            std::cout << "slope,intercept,r2,points\n"
                      << kme::format_double(fit.slope) << ',' << kme::format_double(fit.intercept) << ','
                      << kme::format_double(fit.r_squared) << ',' << fit.points << '\n';
        } else if (*lemma3) {
            const kme::Kernel k = kme::Kernel::matern(s2, 1);
            auto load = [&](const std::optional<std::string>& path, double fallback) {
                if (!path) return kme::Embedding(k, kme::WeightedSample::scalar({{fallback, 1.0}}));
                std::ifstream in(*path);
                if (!in) throw kme::IoError("cannot open '" + *path + "' for reading");
                std::ostringstream text;
                text << k.describe() << '\n' << in.rdbuf();
                return kme::from_text(text.str());
            };
            const kme::Lemma3Result r = kme::lemma3_check(load(a_path, 0.0), load(b_path, 1.0), grid_step, margin);
            std::cout << "lhs,rhs,relative_gap\n"
                      << kme::format_double(r.lhs) << ',' << kme::format_double(r.rhs) << ','
                      << kme::format_double(r.relative_gap) << '\n';
        } else if (*pf) {
            pcfg.n_grid = parse_grid(pf_grid);
            pcfg.kx = kme::Kernel::matern(s1, 1);
            pcfg.kz = kme::Kernel::matern(pf_s2, 1);
            kme::write_csv(kme::run_pushforward_study(pcfg), out_path);
        } else if (*dist) {
            const kme::Embedding a = kme::load_embedding(da);
            const kme::Embedding b = kme::load_embedding(db);
            std::cout << kme::format_double(kme::rkhs_dist(a, b)) << '\n';
        }
    } catch (const kme::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const kme::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
