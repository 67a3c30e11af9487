#include <kme/kme.hpp>

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

struct Result {
    int status;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(KME_CALC_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, ""};
    std::string out;
    std::array<char, 512> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    const int raw = pclose(pipe);
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

} // namespace

TEST(Cli, Fig1WritesCsvAndMetadata) {
    const std::string out = temp("kme_cli_fig1.csv");
    const Result r = run("fig1 --op divide --n-grid 16:32:x2 --trials 2 --gt-size 30 --seed 3 --out " + out);
    ASSERT_EQ(r.status, 0);
    const auto records = kme::read_csv(out);
    EXPECT_EQ(records.size(), 12u);
    const std::string meta = slurp(out + ".meta.json");
    EXPECT_NE(meta.find("\"kz\""), std::string::npos);
    EXPECT_NE(meta.find("\"max_abs_weight_sum\""), std::string::npos);

    const std::string again = temp("kme_cli_fig1_again.csv");
    ASSERT_EQ(run("fig1 --op divide --n-grid 16,32 --trials 2 --gt-size 30 --seed 3 --threads 2 --out " + again).status, 0);
    EXPECT_EQ(slurp(out), slurp(again));
    std::filesystem::remove(out);
    std::filesystem::remove(out + ".meta.json");
    std::filesystem::remove(again);
    std::filesystem::remove(again + ".meta.json");
}

TEST(Cli, RatePrintsOneLine) {
    const std::string in = temp("kme_cli_rate.csv");
    kme::write_csv({{"multiply", "mu2", 100, 100, 0, 1, 0.1}, {"multiply", "mu2", 400, 400, 0, 1, 0.05}}, in);
    const Result r = run("rate --in " + in + " --estimator mu2");
    ASSERT_EQ(r.status, 0);
    // intercept = log(0.1) + 0.5 log(100) = 0 up to rounding
    EXPECT_EQ(r.out.rfind("slope,intercept,r2,points\n-0.5,", 0), 0u) << r.out;
    EXPECT_EQ(r.out.substr(r.out.size() - 5), ",1,2\n") << r.out;
    const std::string intercept = r.out.substr(r.out.find("-0.5,") + 5, r.out.size() - r.out.find("-0.5,") - 10);
    EXPECT_NEAR(kme::parse_double(intercept), 0.0, 1e-14);
    EXPECT_EQ(run("rate --in " + in + " --estimator mu1").status, 1);
    std::filesystem::remove(in);
}

TEST(Cli, Lemma3) {
    const Result r = run("lemma3 --s2 2 --grid-step 1e-3");
    ASSERT_EQ(r.status, 0);
    std::istringstream lines(r.out);
    std::string header, values;
    std::getline(lines, header);
    std::getline(lines, values);
    EXPECT_EQ(header, "lhs,rhs,relative_gap");
    const double gap = kme::parse_double(values.substr(values.rfind(',') + 1));
    EXPECT_LT(gap, 0.01);
    EXPECT_EQ(run("lemma3 --s2 3").status, 1);

    const std::string a = temp("kme_cli_a.txt"), b = temp("kme_cli_b.txt");
    std::ofstream(a) << "0 0.5\n1 0.5\n";
    std::ofstream(b) << "0.5 1\n";
    EXPECT_EQ(run("lemma3 --s2 2 --grid-step 1e-2 --a " + a + " --b " + b).status, 0);
    EXPECT_EQ(run("lemma3 --a /nonexistent/a.txt").status, 2);
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST(Cli, DistAndPushforward) {
    const std::string a = temp("kme_cli_ea.txt"), b = temp("kme_cli_eb.txt");
    std::ofstream(a) << "gaussian(sigma=1)\n0 1\n";
    std::ofstream(b) << "gaussian(sigma=1)\n1 1\n";
    const Result r = run("dist --a " + a + " --b " + b);
    ASSERT_EQ(r.status, 0);
    EXPECT_NEAR(kme::parse_double(kme::trim(r.out)), std::sqrt(2.0 - 2.0 * std::exp(-0.5)), 1e-15);
    std::filesystem::remove(a);
    std::filesystem::remove(b);

    const std::string out = temp("kme_cli_pf.csv");
    ASSERT_EQ(run("pushforward --n-grid 8,16 --trials 2 --gt-size 50 --out " + out).status, 0);
    EXPECT_EQ(kme::read_csv(out).size(), 8u);
    std::filesystem::remove(out);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("fig1 --op add --out /tmp/x.csv").status, 1);
    EXPECT_EQ(run("fig1 --n-grid 64:16:x2 --out /tmp/x.csv").status, 1);
    EXPECT_EQ(run("fig1 --trials 0 --out /tmp/x.csv").status, 1);
    EXPECT_EQ(run("fig1 --sigma wide --out /tmp/x.csv").status, 1);
    EXPECT_EQ(run("fig1 --trials 1 --n-grid 16 --gt-size 10 --out /nonexistent/dir/x.csv").status, 2);
    EXPECT_EQ(run("rate --in /nonexistent/x.csv").status, 2);
    EXPECT_EQ(run("frobnicate").status, 1);
    EXPECT_EQ(run("").status, 1);
    EXPECT_EQ(run("--help").status, 0);
}
