#include "qmarkov/config.hpp"
#include "qmarkov/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace qmarkov;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("qmarkov_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QMARKOV_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::size_t line_count(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST(Config, EmptyGivesDefaults) {
    const auto c = parse_config(nlohmann::json::object());
    EXPECT_DOUBLE_EQ(c.model.lambda, 0.8);
    EXPECT_DOUBLE_EQ(c.model.phi, std::numbers::pi / 4);
    EXPECT_DOUBLE_EQ(c.model.theta0, 0.0);
    EXPECT_EQ(c.sim.strategy, StrategyName::adaptive);
    EXPECT_EQ(c.output.format, "csv");
    EXPECT_DOUBLE_EQ(c.mle_config().search_lo, -0.3);
    EXPECT_DOUBLE_EQ(c.mle_config().search_hi, 0.3);
    EXPECT_EQ(parse_config(nullptr).sim.n, c.sim.n);
}

TEST(Config, FlagPatchOverridesFile) {
    nlohmann::json file = {{"model", {{"lambda", 0.8}, {"phi", 1.0}}}};
    file.merge_patch({{"model", {{"lambda", 0.75}}}});
    const auto c = parse_config(file);
    EXPECT_DOUBLE_EQ(c.model.lambda, 0.75);
    EXPECT_DOUBLE_EQ(c.model.phi, 1.0);
}

TEST(Config, RejectsWithFieldPath) {
    auto msg = [](const nlohmann::json& j) {
        try {
            parse_config(j);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_EQ(msg({{"model", {{"lambda", 1.5}}}}).rfind("model.lambda:", 0), 0u);
    EXPECT_EQ(msg({{"sim", {{"strategy", "greedy"}}}}).rfind("sim.strategy:", 0), 0u);
    EXPECT_EQ(msg({{"sim", {{"n_traj", -3}}}}).rfind("sim.n_traj:", 0), 0u);
    EXPECT_EQ(msg({{"sim", {{"n_list", {10, 0}}}}}).rfind("sim.n_list[1]:", 0), 0u);
    EXPECT_EQ(msg({{"mle", {{"search_lo", 0.2}, {"search_hi", 0.1}}}}).rfind("mle.search_lo:", 0), 0u);
    EXPECT_EQ(msg({{"output", {{"format", "xml"}}}}).rfind("output.format:", 0), 0u);
    EXPECT_EQ(msg({{"extra", 1}}).rfind("extra:", 0), 0u);
    EXPECT_EQ(msg({{"model", {{"lambda", "high"}}}}).rfind("model.lambda:", 0), 0u);
}

TEST(Io, NumberFormatRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 14.472135954999580, 1e17}) {
        EXPECT_EQ(std::stod(io::format_double(v)), v);
    }
    EXPECT_EQ(io::format_double(10.0), "10");
}

TEST(Io, MatrixJsonRoundTrip) {
    CMatrix m(2, 3);
    m << cplx(1, 2), cplx(0.1, 0), cplx(0, -3), cplx(5, 5), cplx(-1e-20, 1), cplx(7, 0);
    const auto j = io::matrix_to_json(m);
    EXPECT_EQ(j.at("rows"), 2);
    EXPECT_EQ(j.at("data").at(1).at(0), 0.1);  // row-major
    EXPECT_EQ(io::matrix_from_json(j), m);
}

TEST(Io, CsvMissingAndText) {
    io::Table t{{"a", "b", "c"}, {}};
    t.add({1.5, io::Cell{std::monostate{}}, std::string("x")});
    EXPECT_EQ(io::to_csv(t), "a,b,c\n1.5,,x\n");
    EXPECT_THROW(t.add({1.0}), std::logic_error);
}

TEST(Io, UncommittedOutputIsRemoved) {
    const auto dir = scratch("staged");
    {
        io::OutputSet out(dir);
        out.write("a.csv", "x\n");
    }
    EXPECT_FALSE(fs::exists(dir / "a.csv"));
    EXPECT_TRUE(fs::is_empty(dir));
    {
        io::OutputSet out(dir);
        out.write("a.csv", "x\n");
        out.commit();
    }
    EXPECT_EQ(slurp(dir / "a.csv"), "x\n");
}

TEST(Cli, TrajectoryRowsAndAngles) {
    const auto dir = scratch("traj");
    ASSERT_EQ(run_cli("trajectory --n 200 --seed 5 --out " + dir.string()), 0);
    std::ifstream is(dir / "trajectory.csv");
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "step,outcome,basis_angle,p_outcome,loglik_running");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        std::stringstream ss(line);
        std::string step, outcome, angle;
        std::getline(ss, step, ',');
        std::getline(ss, outcome, ',');
        std::getline(ss, angle, ',');
        const double a = std::stod(angle);
        EXPECT_GE(a, -std::numbers::pi / 2);
        EXPECT_LT(a, std::numbers::pi / 2);
    }
    EXPECT_EQ(rows, 200u);
}

TEST(Cli, FisherIsByteDeterministic) {
    const auto a = scratch("fisher_a"), b = scratch("fisher_b");
    const std::string args = "fisher --n-max 20 --n-step 10 --n-traj 300 --seed 7 --out ";
    ASSERT_EQ(run_cli(args + a.string()), 0);
    ASSERT_EQ(run_cli(args + b.string()), 0);
    const auto sa = slurp(a / "fisher.csv");
    EXPECT_EQ(sa, slurp(b / "fisher.csv"));
    EXPECT_EQ(line_count(sa), 3u);
    EXPECT_EQ(sa.substr(0, sa.find('\n')),
              "n,qfi_oracle,qfi_appendix,qfi_lemma,rate_times_n,cfi_adaptive_sys,se_adaptive_sys,cfi_adaptive_out,"
              "se_adaptive_out,cfi_fixed,se_fixed,n_traj,seed");
}

TEST(Cli, MleOutputs) {
    const auto dir = scratch("mle");
    ASSERT_EQ(run_cli("mle --n-list 20,40 --n-runs 100 --seed 2 --out " + dir.string()), 0);
    EXPECT_EQ(line_count(slurp(dir / "mle_runs.csv")), 201u);
    const auto summary = slurp(dir / "mle_summary.csv");
    EXPECT_EQ(line_count(summary), 3u);
    EXPECT_EQ(summary.substr(0, summary.find('\n')), "n,mse,inv_mse,n_runs,strategy");
}

TEST(Cli, JsonFormatAndMatrices) {
    const auto dir = scratch("json");
    ASSERT_EQ(run_cli("trajectory --n 5 --format json --out " + dir.string()), 0);
    const auto j = nlohmann::json::parse(slurp(dir / "trajectory.json"));
    EXPECT_EQ(j.size(), 5u);
    ASSERT_EQ(run_cli("absorber --theta0 0.2 --out " + dir.string()), 0);
    const auto a = nlohmann::json::parse(slurp(dir / "absorber.json"));
    EXPECT_EQ(io::matrix_from_json(a.at("V")).rows(), 4);
    EXPECT_LT(a.at("checks").at("V_unitarity").get<double>(), 1e-9);
    EXPECT_LT(a.at("checks").at("marginal_error").get<double>(), 1e-9);
    ASSERT_EQ(run_cli("stationary --out " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "stationary.json"));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("codes");
    EXPECT_EQ(run_cli("stationary --lambda 1.5 --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("stationary --no-such-flag"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli("trajectory --strategy two_stage --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("mle --strategy two_stage --n 10 --out " + dir.string()), 2);
    std::ofstream(dir / "bad.json") << "{\"model\": {\"lambda\": 0.8,}}";
    EXPECT_EQ(run_cli("stationary --config " + (dir / "bad.json").string()), 2);
    std::ofstream(dir / "good.json") << "{\"model\": {\"lambda\": 0.8}}";
    EXPECT_EQ(run_cli("stationary --lambda 0.75 --config " + (dir / "good.json").string() + " --out " + dir.string()),
              0);
    EXPECT_DOUBLE_EQ(nlohmann::json::parse(slurp(dir / "stationary.json")).at("lambda").get<double>(), 0.75);
    // runtime failure: the output directory is a regular file
    std::ofstream(dir / "occupied") << "x";
    EXPECT_EQ(run_cli("trajectory --n 5 --out " + (dir / "occupied").string()), 1);
    EXPECT_EQ(slurp(dir / "occupied"), "x");
}
