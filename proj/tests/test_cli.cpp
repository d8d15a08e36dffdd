#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fptd/io.hpp"
#include "fptd/model.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(FPTD_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fptd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ZeroDriftDensityIsTheBrownianDensity) {
  const auto r = run("estimate --drift 0 --x 1 --t-max 5 --n 1000 --seed 7 --out-dir " + out("a"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = csv_rows(slurp(dir_ / "a" / "density.csv"));
  ASSERT_EQ(rows.front(), (std::vector<std::string>{"t", "p_hat", "std_err", "lambda_hat"}));
  ASSERT_EQ(rows.size(), 201u);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double t = std::stod(rows[k][0]);
    EXPECT_EQ(rows[k][1], fptd::format_number(fptd::bm_fpt_density(1.0, t)));
    EXPECT_EQ(rows[k][2], "0");
  }
  const auto rate = csv_rows(slurp(dir_ / "a" / "rate.csv"));
  EXPECT_EQ(rate.front(),
            (std::vector<std::string>{"t", "lambda_hat", "lower_bound", "upper_bound", "small_t_limit"}));
}

TEST_F(Cli, ByteIdenticalReruns) {
  const std::string args = "estimate --drift -z --x 1 --t-max 4 --grid-points 20 --n 200 --m 50 --seed 3";
  ASSERT_EQ(run(args + " --out-dir " + out("a")).code, 0);
  ASSERT_EQ(run(args + " --threads 3 --out-dir " + out("b")).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "density.csv"), slurp(dir_ / "b" / "density.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "rate.csv"), slurp(dir_ / "b" / "rate.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "meta.json"), slurp(dir_ / "b" / "meta.json"));
}

TEST_F(Cli, MetaJsonReproducesTheRun) {
  ASSERT_EQ(run("estimate --drift -z --x 1 --t-max 3 --grid-points 10 --n 100 --m 20 --seed 9 --out-dir " +
                out("a"))
                .code,
            0);
  const auto r = run("estimate --config " + out("a/meta.json") + " --out-dir " + out("b"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(dir_ / "a" / "density.csv"), slurp(dir_ / "b" / "density.csv"));
  const auto meta = nlohmann::json::parse(slurp(dir_ / "a" / "meta.json"));
  EXPECT_EQ(meta["N"], 100);
  EXPECT_EQ(meta["seed"], 9);
  EXPECT_EQ(meta["model"]["x"], 1.0);
}

TEST_F(Cli, FlagsOverrideFileAndEnvironment) {
  std::ofstream(dir_ / "c.json") << R"({"drift": "-z", "x": 1, "T": 2, "grid_points": 5, "N": 50, "M": 10, "seed": 1})";
  ASSERT_EQ(run("estimate --config " + out("c.json") + " --seed 2 --out-dir " + out("a")).code, 0);
  ASSERT_EQ(run("estimate --config " + out("c.json") + " --out-dir " + out("b"), "FPTD_SEED=2").code, 0);
  ASSERT_EQ(run("estimate --config " + out("c.json") + " --out-dir " + out("c")).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "density.csv"), slurp(dir_ / "b" / "density.csv"));
  EXPECT_NE(slurp(dir_ / "a" / "density.csv"), slurp(dir_ / "c" / "density.csv"));
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "a" / "meta.json"))["seed"], 2);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  EXPECT_EQ(run("estimate --drift 'z +' --x 1 --out-dir " + out("a")).code, 1);
  EXPECT_EQ(run("estimate --drift -z --out-dir " + out("a")).code, 1);
  EXPECT_EQ(run("estimate --drift -z --x -1 --out-dir " + out("a")).code, 1);
  EXPECT_EQ(run("estimate --drift 'log(z)' --x 1 --out-dir " + out("a")).code, 1);
  std::ofstream(dir_ / "bad.json") << R"({"drift": "-z", "x": 1, "colour": 3})";
  const auto r = run("estimate --config " + out("bad.json") + " --out-dir " + out("a"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("colour"), std::string::npos);
}

TEST_F(Cli, NumericFailureExitsTwo) {
  // gamma overflows for bridge radii around 1e100.
  const auto r = run("estimate --drift 'exp(z^2)' --x 1 --t-max 1e4 --grid-points 2 --n 10 --m 10 --out-dir " +
                     out("a"));
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST_F(Cli, Lamperti) {
  const auto r = run("lamperti --b 0 --sigma z --level 1 --start 2.718281828459045");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("x = 1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("0,-0.5,0.125"), std::string::npos) << r.out;
  EXPECT_EQ(run("lamperti --drift -z --x 1").code, 1);
}

TEST_F(Cli, TailWritesLadderAndContinuousMixture) {
  const auto r = run("tail --drift 0 --x 1 --t-max 4 --grid-points 40 --n 10 --m 10 --tail-T 2 --tail-n 1 "
                     "--tail-mesh 1000 --out-dir " + out("a"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto eigen = nlohmann::json::parse(slurp(dir_ / "a" / "eigen.json"));
  ASSERT_EQ(eigen["ladder"].size(), 3u);
  EXPECT_NEAR(eigen["ladder"][0]["mu1"].get<double>(), std::numbers::pi * std::numbers::pi / 2, 1e-6);
  EXPECT_NEAR(eigen["ladder"][1]["mu1"].get<double>(), std::numbers::pi * std::numbers::pi / 8, 1e-6);
  EXPECT_DOUBLE_EQ(eigen["T"].get<double>(), 2.0);
  const auto rows = csv_rows(slurp(dir_ / "a" / "density_mixture.csv"));
  ASSERT_EQ(rows.front(), (std::vector<std::string>{"t", "p_mixture"}));
  bool saw_T = false;
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (std::stod(rows[k][0]) == 2.0) {
      saw_T = true;
      EXPECT_EQ(std::stod(rows[k][1]), fptd::bm_fpt_density(1.0, 2.0));
    }
  EXPECT_TRUE(saw_T);
  EXPECT_NEAR(std::stod(rows.back()[0]), 8.0, 1e-9);
}

TEST_F(Cli, CompareReportsBothStepSizes) {
  const auto r = run("compare --drift 0 --x 1 --t-max 2 --grid-points 20 --m 20 --baseline-ne 2000 --out-dir " +
                     out("a"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = csv_rows(slurp(dir_ / "a" / "compare.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1][1], "0.050000000000000003");
  EXPECT_EQ(rows[2][1], "0.01");
  EXPECT_EQ(rows[3][0], "direct");
  EXPECT_EQ(std::stod(rows[3][4]), 0.0);  // zero drift: the direct estimate is exact
}

TEST_F(Cli, ValidateZeroDriftPasses) {
  const auto r = run("validate --drift 0 --x 1 --n 100 --m 10");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, DumpEnsemble) {
  ASSERT_EQ(run("estimate --drift -z --x 1 --t-max 1 --grid-points 2 --n 3 --m 4 --out-dir " + out("a") +
                " --dump-ensemble " + out("e.bin"))
                .code,
            0);
  EXPECT_EQ(fs::file_size(dir_ / "e.bin"), 8u + 4u + 24u + 3u * 5u * 3u * 8u);
}
