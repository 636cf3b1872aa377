#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"

using namespace thetacf;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "thetacf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

Json run_json(const std::vector<std::string>& args) {
    const Result r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return Json::parse(r.out);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("thetacf_test_" + name);
}

}  // namespace

TEST(CliExpand, DigitsOfOneHalf) {
    const Json j = run_json({"expand", "--m", "2", "--x", "1/2", "--digits", "3"});
    EXPECT_EQ(j["result"]["digits"], Json::parse("[2,2,4]"));
    EXPECT_EQ(j["command"], "expand");
    EXPECT_EQ(j["config"]["x"], "1/2");
    EXPECT_EQ(j["result"]["convergents"].size(), 3u);
    EXPECT_EQ(j["result"]["convergents"][0]["q"]["b"], "2");
    // the cylinder of [2, 2, 4] contains 1/2
    const double lo = j["result"]["cylinder"]["lower"]["value"];
    const double hi = j["result"]["cylinder"]["upper"]["value"];
    EXPECT_LT(std::min(lo, hi), 0.5);
    EXPECT_GT(std::max(lo, hi), 0.5);
}

TEST(CliExpand, GlobalOptionsBeforeOrAfterSubcommand) {
    const Result a = run_cli({"--m", "3", "expand", "--x", "1/3"});
    const Result b = run_cli({"expand", "--x", "1/3", "--m", "3"});
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(Json::parse(a.out)["result"], Json::parse(b.out)["result"]);
}

TEST(CliExpand, ValidationErrors) {
    Result r = run_cli({"expand", "--m", "4", "--x", "1/2"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("m must not be a perfect square"), std::string::npos);
    EXPECT_EQ(run_cli({"expand", "--m", "2", "--x", "0.99"}).code, 2);
    EXPECT_EQ(run_cli({"expand", "--m", "2", "--x", "abc"}).code, 2);
    EXPECT_EQ(run_cli({"expand", "--m", "2", "--x", "1/2", "--digits", "0"}).code, 2);
    EXPECT_EQ(run_cli({"expand", "--m", "2"}).code, 2);
    EXPECT_EQ(run_cli({"expand", "--x", "1/2", "--format", "xml"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(CliExpand, DecimalInputIsRoundedWithNotice) {
    const Result r = run_cli({"expand", "--m", "2", "--x", "0.5", "--digits", "3"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("read as 1/2"), std::string::npos);
    EXPECT_EQ(Json::parse(r.out)["result"]["digits"], Json::parse("[2,2,4]"));
}

TEST(CliExpand, QuadraticInputAndFloatBackend) {
    // 1/(3 theta) = (2/3) theta for m = 2
    const Json j = run_json({"expand", "--m", "2", "--x", "0,2/3", "--digits", "5"});
    EXPECT_EQ(j["result"]["digits"], Json::parse("[3]"));
    EXPECT_TRUE(j["result"]["terminated"].get<bool>());
    const Json f = run_json({"expand", "--m", "2", "--x", "1/2", "--digits", "50", "--backend", "float"});
    EXPECT_TRUE(f["result"]["precision_exhausted"].get<bool>());
    EXPECT_EQ(f["result"]["digits"][0], 2);
}

TEST(CliParsing, LimitDenominatorMatchesBruteForce) {
    const BigRational r(314159265, 100000000);
    for (int bound : {1, 7, 57, 113, 1000}) {
        const BigRational got = cli::limit_denominator(r, BigInt(bound));
        // brute force: best p/q for each q <= bound
        BigRational best = BigRational(0);
        bool have = false;
        for (int q = 1; q <= bound; ++q) {
            const BigInt p = detail::floor_div(numerator(r) * q, denominator(r));
            for (const BigInt& cand : {p, BigInt(p + 1)}) {
                const BigRational c(cand, q);
                if (!have || abs(c - r) < abs(best - r)) {
                    best = c;
                    have = true;
                }
            }
        }
        EXPECT_EQ(abs(got - r), abs(best - r)) << "bound=" << bound;
        EXPECT_LE(denominator(got), bound);
    }
    EXPECT_EQ(cli::limit_denominator(r, BigInt(7)), BigRational(22, 7));
    EXPECT_EQ(cli::limit_denominator(r, BigInt(113)), BigRational(355, 113));
}

TEST(CliConstants, PublishedQValues) {
    const Json j10 = run_json({"constants", "--m", "10"});
    EXPECT_NEAR(j10["result"]["theta"].get<double>(), 0.316228, 1e-6);
    EXPECT_NEAR(j10["result"]["q_contraction"]["value"].get<double>(), 0.0533201, 5e-7);
    const Json j17 = run_json({"constants", "--m", "17"});
    EXPECT_NEAR(j17["result"]["theta"].get<double>(), 0.242536, 1e-6);
    EXPECT_NEAR(j17["result"]["q_contraction"]["value"].get<double>(), 0.0305636, 5e-7);
    const Json j2 = run_json({"constants", "--m", "2"});
    EXPECT_EQ(j2["result"]["k_m"], "1/3");
    EXPECT_TRUE(j2["result"]["q_less_than_theta"].get<bool>());
    EXPECT_EQ(run_cli({"constants", "--m", "2", "--tolerance", "-1"}).code, 2);
}

TEST(CliConstants, CsvOutput) {
    const Result r = run_cli({"constants", "--m", "2", "--format", "csv"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "quantity,value,error_bound");
}

TEST(CliGk, UniformStartAndCsvWithSummary) {
    const auto path = temp_path("gk.csv");
    const Result r = run_cli({"gk", "--m", "10", "--iterations", "12", "--format", "csv", "--out", path.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = read_file(path);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,sup_error,ratio,M_n,q_reference");
    std::size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    EXPECT_EQ(lines, 14u);
    const Json summary = Json::parse(read_file(path.string() + ".summary.json"));
    EXPECT_TRUE(summary["result"]["summary"]["ratios_within_q"].get<bool>());
    EXPECT_TRUE(summary["result"]["summary"]["monotone_until_noise_floor"].get<bool>());
    EXPECT_TRUE(summary["result"]["summary"]["final_below_noise_floor"].get<bool>());
    EXPECT_TRUE(summary["result"]["summary"]["M_contraction_holds"].get<bool>());
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".summary.json");
}

TEST(CliGk, GammaStartStaysAtNoiseFloor) {
    const Json j = run_json({"gk", "--m", "10", "--start", "gamma", "--iterations", "4"});
    for (const auto& e : j["result"]["sup_errors"]) EXPECT_LT(e.get<double>(), 1e-12);
}

TEST(CliGk, CustomGridFile) {
    const auto path = temp_path("grid.txt");
    const double th = 1 / std::sqrt(10.0);
    {
        std::ofstream f(path);
        f << "# x F(x)\n";
        for (int i = 0; i <= 400; ++i) {
            const double x = i == 400 ? th : th * i / 400;
            f.precision(17);
            f << x << " " << std::pow(x / th, 2) << "\n";
        }
    }
    const Json j = run_json({"gk", "--m", "10", "--start", "custom", "--grid-file", path.string(), "--iterations", "6"});
    const auto& e = j["result"]["sup_errors"];
    EXPECT_LT(e.back().get<double>(), 1e-5 * e.front().get<double>());
    EXPECT_EQ(run_cli({"gk", "--m", "10", "--start", "custom"}).code, 2);
    EXPECT_EQ(run_cli({"gk", "--m", "10", "--start", "custom", "--grid-file", "/nonexistent/grid"}).code, 2);
    EXPECT_EQ(run_cli({"gk", "--m", "10", "--degree", "4"}).code, 2);
    std::filesystem::remove(path);
}

TEST(CliErgodic, ValidationAndHistogramCsv) {
    EXPECT_EQ(run_cli({"ergodic", "--samples", "0"}).code, 2);
    EXPECT_EQ(run_cli({"ergodic", "--seeds", "0"}).code, 2);
    EXPECT_EQ(run_cli({"ergodic", "--checkpoints", "10,5"}).code, 2);
    const Result r = run_cli({"ergodic", "--seeds", "3", "--n", "50", "--orbits", "2", "--length", "10000",
                              "--checkpoints", "100,1000,10000", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "k,count,frequency,law,sigma");
}

TEST(CliErgodic, ReportsLevyNearTwoBeta) {
    const Json j = run_json({"ergodic", "--m", "2", "--seeds", "20", "--n", "200", "--seed", "42", "--orbits", "2",
                             "--length", "10000", "--checkpoints", "100,1000,10000"});
    const auto& levy = j["result"]["levy"];
    EXPECT_TRUE(levy["within_tolerance"].get<bool>());
    EXPECT_NEAR(levy["reference"].get<double>(), 2 * levy_beta(new_params(2)).value, 1e-12);
    EXPECT_EQ(j["result"]["exact_orbits"].size(), 20u);
}

TEST(CliOperator, FamiliesRespectBounds) {
    const Json j = run_json({"operator", "--m", "10", "--count", "10"});
    EXPECT_TRUE(j["result"]["all_within_bounds"].get<bool>());
    EXPECT_EQ(j["result"]["rows"].size(), 3u + 2u + 10u + 10u);
    const Json c = run_json({"operator", "--m", "2", "--family", "constant"});
    for (const auto& row : c["result"]["rows"]) EXPECT_LE(row["after"].get<double>(), 1e-12);
    EXPECT_EQ(run_cli({"operator", "--family", "bogus"}).code, 2);
}

TEST(CliDeterminism, RepeatedRunsAreByteIdentical) {
    const std::vector<std::vector<std::string>> commands = {
        {"expand", "--m", "3", "--x", "2/7", "--digits", "30"},
        {"constants", "--m", "5"},
        {"gk", "--m", "2", "--iterations", "5"},
        {"ergodic", "--seeds", "4", "--n", "80", "--orbits", "3", "--length", "10000", "--checkpoints", "100,1000,10000"},
        {"operator", "--m", "3", "--count", "5"},
    };
    for (const auto& cmd : commands) {
        const Result a = run_cli(cmd);
        const Result b = run_cli(cmd);
        EXPECT_EQ(a.code, 0) << a.err;
        EXPECT_EQ(a.out, b.out) << cmd.front();
    }
    auto with_workers = commands[3];
    with_workers.insert(with_workers.end(), {"--workers", "3"});
    EXPECT_EQ(run_cli(commands[3]).out, run_cli(with_workers).out);
}
