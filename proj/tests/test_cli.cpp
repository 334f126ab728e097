#include "ramsey/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace ramsey;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "ramsey_thermo");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("ramsey_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string at(const std::string& sub) const { return (dir / sub).string(); }
    fs::path dir;
};

}  // namespace

TEST(FormatNumber, Cases) {
    EXPECT_EQ(io::format_number(0.0), "0");
    EXPECT_EQ(io::format_number(-0.0), "0");
    EXPECT_EQ(io::format_number(0.25), "0.25");
    EXPECT_EQ(io::format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(io::format_number(616850.275), "6.16850275e+05");
    EXPECT_EQ(io::format_number(1e-3), "0.001");
    EXPECT_EQ(io::format_number(2.5e-7), "2.5e-07");
    EXPECT_EQ(io::format_number(-1e4), "-10000");
    EXPECT_EQ(io::format_number(std::nan("")), "nan");
    EXPECT_EQ(io::format_optional(std::nullopt), "");
}

TEST(Csv, HeaderOnlyAndQuoting) {
    io::CsvTable t({"a", "b"});
    EXPECT_EQ(t.str(), "a,b\r\n");
    t.add_row({"", "x,y"});
    EXPECT_EQ(t.str(), "a,b\r\n,\"x,y\"\r\n");
    EXPECT_THROW(t.add_row({"1"}), std::invalid_argument);
}

TEST(Meta, DoublesRoundTrip) {
    io::MetaFile m;
    m.set("x", 2.0 * std::numbers::pi);
    m.comment("note");
    EXPECT_EQ(m.str(), "# note\nx=6.283185307179586\n");
}

TEST(Svg, DegenerateRangesStillRender) {
    svg::PlotSpec s;
    s.x = {"x", true};
    s.left = {"y", false};
    s.series = {{"flat", {1.0, 1.0}, {0.0, 0.0}}, {"gap", {1.0, 2.0}, {std::nan(""), 1.0}}};
    const std::string o = svg::render(s);
    EXPECT_NE(o.find("<polyline"), std::string::npos);
    EXPECT_EQ(o.find("nan"), std::string::npos);
    EXPECT_EQ(o.find("inf"), std::string::npos);
    s.series.clear();
    EXPECT_THROW(svg::render(s), std::invalid_argument);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"fig1"}).code, 2);
    EXPECT_EQ(run({"fig1", "--regime", "x"}).code, 2);
    EXPECT_EQ(run({"fig2", "--eps", "-1"}).code, 2);
    EXPECT_EQ(run({"fig2", "--eps", "1", "--tol", "1e-2"}).code, 2);
    EXPECT_EQ(run({"fig3", "--g-min", "1", "--g-max", "0.5", "--out-dir", at("a")}).code, 2);
    EXPECT_EQ(run({"evolve", "--g", "0.1", "--eps", "0.1", "--t-end", "1", "--picture", "lab"}).code, 2);
    EXPECT_EQ(run({"fig1", "--regime", "c_e", "--config", at("missing.meta")}).code, 2);
    EXPECT_EQ(run({"fig1", "--regime", "c_e", "--n-max", "20", "--n-max-cap", "10"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_FALSE(fs::exists(dir));
}

TEST_F(CliTest, Fig1WritesTableAndRefusesToClobber) {
    const Outcome r = run({"fig1", "--regime", "c_e", "--samples", "11", "--out-dir", at("o")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "o" / "fig1_c_e.csv");
    EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "gt,sigma_z,entropy_norm,jw_norm,jq_norm");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
    EXPECT_FALSE(fs::exists(dir / "o" / "fig1_c_e.svg"));

    const Outcome again = run({"fig1", "--regime", "c_e", "--samples", "11", "--out-dir", at("o")});
    EXPECT_EQ(again.code, 2);
    EXPECT_NE(again.err.find("--overwrite"), std::string::npos);
    EXPECT_EQ(run({"fig1", "--regime", "c_e", "--samples", "11", "--out-dir", at("o"), "--overwrite"}).code, 0);
}

TEST_F(CliTest, CommandLineOverridesConfig) {
    ASSERT_EQ(run({"fig1", "--regime", "c_e", "--samples", "21", "--out-dir", at("a")}).code, 0);
    const Outcome r = run({"fig1", "--config", at("a/fig1_c_e.meta"), "--samples", "5", "--out-dir", at("b")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "b" / "fig1_c_e.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
    EXPECT_NE(slurp(dir / "b" / "fig1_c_e.meta").find("samples=5\n"), std::string::npos);
}

TEST_F(CliTest, ConfigRerunIsIdentical) {
    ASSERT_EQ(run({"fig1", "--regime", "c_e", "--samples", "21", "--gt-max", "3.14159", "--svg", "--out-dir",
                   at("a")})
                  .code,
              0);
    const Outcome r = run({"fig1", "--config", at("a/fig1_c_e.meta"), "--out-dir", at("b")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"fig1_c_e.csv", "fig1_c_e.meta", "fig1_c_e.svg"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST_F(CliTest, SweepRowsWithoutTstarHaveEmptyFields) {
    const Outcome r = run({"fig2", "--eps", "0", "--grid-points", "2", "--g-min", "0.01", "--g-max", "0.02",
                       "--n-max", "2", "--n-max-cap", "2", "--out-dir", at("o")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "o" / "fig2_eps0.csv");
    EXPECT_NE(csv.find("\r\n0.01,,,,,false\r\n"), std::string::npos) << csv;
}

TEST_F(CliTest, CrossingPrintsCouplingAndCoherence) {
    const Outcome r = run({"crossing", "--eps", "0.25"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("g_cross_over_kappa = 0.11006"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("re_sigma_plus_at_tstar = 0.22013"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvolveRotatingFrameLeavesFluxesEmpty) {
    const Outcome r = run({"evolve", "--g", "0.3", "--eps", "0.5", "--t-end", "2", "--samples", "3", "--picture",
                       "rotating", "--out-dir", at("o")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "o" / "evolve.csv");
    EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "t,sigma_z,re_sigma_plus,im_sigma_plus,entropy_norm,jw_norm,jq_norm");
    EXPECT_NE(csv.find(",,\r\n"), std::string::npos);
}
