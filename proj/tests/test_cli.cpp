#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "evidence.hpp"
#include "vbl/dataset.hpp"

namespace {

namespace fs = std::filesystem;
using namespace vbl;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result vbl_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    cli::configure_logging();
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("vbl_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static Dataset table(const std::string& p) { return csv::read(fs::path(p)); }

  fs::path dir_;
};

// ---- gen --------------------------------------------------------------------------------

TEST_F(Cli, GenIsDeterministicAndSized) {
  const auto spec = write("spec.txt", "kind = gmm\npreset = three-cluster\nn = 250\n");
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("a.csv"), "--seed", "7"}).code, 0);
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("b.csv"), "--seed", "7"}).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(table(path("a.csv")).size(), 250);
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("c.csv"), "--seed", "8"}).code, 0);
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(Cli, GenWritesTruth) {
  const auto spec = write("spec.txt", "kind = bss-mix\nd = 3\nm = 2\nn = 40\nsnr_db = inf\n");
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("y.csv"), "--truth", path("s.csv")}).code, 0);
  const auto y = table(path("y.csv"));
  const auto s = table(path("s.csv"));
  EXPECT_EQ(y.dim(), 3);
  EXPECT_EQ(s.dim(), 2);
  EXPECT_EQ(s.size(), 40);
}

TEST_F(Cli, GenRejectsBadKeyByName) {
  const auto spec = write("spec.txt", "kind = gmm\npreset = three-cluster\nwieghts = 1\n");
  const auto r = vbl_run({"gen", "--spec", spec, "--out", path("a.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("wieghts"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("a.csv")));
}

TEST_F(Cli, GenRejectsMalformedValues) {
  EXPECT_EQ(vbl_run({"gen", "--spec", write("a.txt", "kind = spiral\nnoise = lots\n"), "--out", path("o.csv")}).code, 2);
  EXPECT_EQ(vbl_run({"gen", "--spec", write("b.txt", "kind = bss-mix\nsnr_db = -inf\n"), "--out", path("o.csv")}).code, 2);
  EXPECT_EQ(vbl_run({"gen", "--spec", write("c.txt", "kind = pie\n"), "--out", path("o.csv")}).code, 2);
  EXPECT_EQ(vbl_run({"gen", "--spec", path("missing.txt"), "--out", path("o.csv")}).code, 2);
}

// ---- fit-gmm ----------------------------------------------------------------------------

TEST_F(Cli, FitGmmSingleStructureHasProbabilityOne) {
  const auto spec = write("spec.txt", "kind = gmm\npreset = three-cluster\nn = 200\n");
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("y.csv")}).code, 0);
  const auto r = vbl_run({"fit-gmm", "--data", path("y.csv"), "--out-dir", path("rep"), "-K", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "m=1\n");
  const auto post = table(path("rep/posterior.csv"));
  ASSERT_EQ(post.size(), 1);
  EXPECT_EQ(post.columns.back(), "probability");
  EXPECT_DOUBLE_EQ(post.values(0, post.dim() - 1), 1.0);
  EXPECT_TRUE(fs::exists(path("rep/trace_m1.csv")));
  EXPECT_TRUE(fs::exists(path("rep/model.txt")));
}

TEST_F(Cli, FitGmmTwoPointsChooseAtMostTwo) {
  const auto data = write("y.csv", "x0\n0.0\n1.0\n");
  const auto r = vbl_run({"fit-gmm", "--data", data, "--out-dir", path("rep"), "-K", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(r.out.rfind("m=", 0), 0u);
  EXPECT_LE(std::stoi(r.out.substr(2)), 2);
}

TEST_F(Cli, FitGmmRegeneratesThreeClusterSelection) {
  const auto spec = write("spec.txt", "kind = gmm\npreset = three-cluster\n");
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("y.csv")}).code, 0);
  const auto r = vbl_run({"fit-gmm", "--data", path("y.csv"), "--out-dir", path("rep"), "--max-structures", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "m=3\n");
  EXPECT_EQ(table(path("rep/posterior.csv")).size() + (fs::exists(path("rep/failures.csv")) ? table(path("rep/failures.csv")).size() : 0), 10);
}

TEST_F(Cli, FitGmmUsageErrors) {
  const auto data = write("y.csv", "x0\n0.0\n1.0\n2.5\n");
  EXPECT_EQ(vbl_run({"fit-gmm", "--data", path("nope.csv"), "--out-dir", path("rep")}).code, 2);
  EXPECT_EQ(vbl_run({"fit-gmm", "--data", data}).code, 2);
  const auto cfg = write("cfg.txt", "max_structures = 2\nmystery = 1\n");
  const auto r = vbl_run({"fit-gmm", "--data", data, "--out-dir", path("rep"), "--config", cfg});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("mystery"), std::string::npos) << r.err;
  EXPECT_EQ(vbl_run({"fit-gmm", "--data", data, "--out-dir", path("rep"), "--tol", "-1"}).code, 2);
}

TEST_F(Cli, FlagsOverrideConfig) {
  const auto data = write("y.csv", "x0\n0.0\n1.0\n2.5\n3.0\n");
  const auto cfg = write("cfg.txt", "max_structures = 3\n");
  ASSERT_EQ(vbl_run({"fit-gmm", "--data", data, "--out-dir", path("a"), "--config", cfg}).code, 0);
  ASSERT_EQ(vbl_run({"fit-gmm", "--data", data, "--out-dir", path("b"), "--config", cfg, "-K", "1"}).code, 0);
  const auto rows = [&](const std::string& d) {
    Eigen::Index n = table(path(d + "/posterior.csv")).size();
    if (fs::exists(path(d + "/failures.csv"))) n += table(path(d + "/failures.csv")).size();
    return n;
  };
  EXPECT_EQ(rows("a"), 3);
  EXPECT_EQ(rows("b"), 1);
}

// ---- fit-bss ----------------------------------------------------------------------------

TEST_F(Cli, FitBssMissingDataIsUsageError) {
  EXPECT_EQ(vbl_run({"fit-bss", "--data", path("missing.csv"), "--out-dir", path("rep")}).code, 2);
}

TEST_F(Cli, FitBssWritesReports) {
  const auto spec = write("spec.txt", "kind = bss-mix\nd = 4\nm = 2\nn = 400\nsnr_db = 20\n");
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("y.csv"), "--truth", path("s.csv")}).code, 0);
  const auto r = vbl_run({"fit-bss", "--data", path("y.csv"), "--truth", path("s.csv"), "--out-dir", path("rep"), "-K",
                          "3", "--lambda-update"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "m=2\n");
  const auto sources = table(path("rep/sources.csv"));
  EXPECT_EQ(sources.size(), 400);
  EXPECT_EQ(sources.dim(), 2);
  const auto align = table(path("rep/alignment.csv"));
  ASSERT_EQ(align.size(), 1);
  EXPECT_LT(align.values(0, 1), 0.1);
  for (int m = 1; m <= 3; ++m) EXPECT_TRUE(fs::exists(path("rep/trace_m" + std::to_string(m) + ".csv")));
}

TEST_F(Cli, FitBssRejectsBadOptions) {
  const auto spec = write("spec.txt", "kind = bss-mix\nd = 3\nm = 1\nn = 100\n");
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("y.csv")}).code, 0);
  EXPECT_EQ(vbl_run({"fit-bss", "--data", path("y.csv"), "--out-dir", path("r"), "--alpha-mode", "sideways"}).code, 2);
  EXPECT_EQ(vbl_run({"fit-bss", "--data", path("y.csv"), "--out-dir", path("r"), "--snr-sweep", "0,10"}).code, 2);
  const auto short_truth = write("t.csv", "s0\n1.0\n2.0\n");
  EXPECT_EQ(vbl_run({"fit-bss", "--data", path("y.csv"), "--out-dir", path("r"), "--truth", short_truth}).code, 2);
}

TEST_F(Cli, SnrSweepErrorDecreases) {
  const auto spec = write("spec.txt", "kind = bss-mix\nd = 4\nm = 2\nn = 2000\n");
  const auto r = vbl_run({"fit-bss", "--spec", spec, "--snr-sweep", "0,10,20,30", "--lambda-update", "--out-dir",
                          path("rep")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto sweep = table(path("rep/snr_sweep.csv"));
  ASSERT_EQ(sweep.size(), 4);
  EXPECT_EQ(sweep.columns[2], "log10_relative_error");
  for (Eigen::Index i = 1; i < 4; ++i) EXPECT_LT(sweep.values(i, 2), sweep.values(i - 1, 2)) << "row " << i;
}

TEST_F(Cli, FitBssRegeneratesFiveSourceSelection) {
  const auto spec = write("spec.txt", "kind = bss-mix\nd = 11\nm = 5\nn = 4000\nsnr_db = 20\n");
  ASSERT_EQ(vbl_run({"gen", "--spec", spec, "--out", path("y.csv")}).code, 0);
  const auto r = vbl_run({"fit-bss", "--data", path("y.csv"), "--out-dir", path("rep"), "-K", "8", "--lambda-update"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "m=5\n");
}

// ---- predict ----------------------------------------------------------------------------

class CliPredict : public Cli {
protected:
  void SetUp() override {
    Cli::SetUp();
    std::ostringstream rows;
    rows << "x0\n";
    for (double v : {-1.2, 0.3, 0.8, 1.1, 1.9, 2.2, 2.6, 3.4, 3.9, 4.7, 0.1, 2.0, 5.2, 1.5, -0.4, 2.9, 3.1, 1.7, 2.4, 0.6})
      rows << v << "\n";
    data_ = write("train.csv", rows.str());
    ASSERT_EQ(vbl_run({"fit-gmm", "--data", data_, "--out-dir", path("rep"), "-K", "1"}).code, 0);
  }
  std::string data_;
};

TEST_F(CliPredict, TrainingPointHasFiniteDensity) {
  const auto q = write("q.csv", "x0\n2.0\n");
  ASSERT_EQ(vbl_run({"predict", "--model", path("rep/model.txt"), "--query", q, "--out", path("p.csv")}).code, 0);
  const auto p = table(path("p.csv"));
  ASSERT_EQ(p.size(), 1);
  EXPECT_EQ(p.columns[0], "log_density");
  EXPECT_TRUE(std::isfinite(p.values(0, 0)));
}

TEST_F(CliPredict, GridDensityIntegratesToOne) {
  std::ostringstream grid;
  grid << "x0\n";
  const double lo = -12.0, hi = 16.0;
  const int nodes = 401;
  const double h = (hi - lo) / (nodes - 1);
  for (int k = 0; k < nodes; ++k) grid << lo + k * h << "\n";
  const auto q = write("grid.csv", grid.str());
  ASSERT_EQ(vbl_run({"predict", "--model", path("rep/model.txt"), "--query", q, "--out", path("p.csv")}).code, 0);
  const auto p = table(path("p.csv"));
  ASSERT_EQ(p.size(), nodes);
  double integral = 0.0;
  for (int k = 0; k < nodes; ++k) integral += (k == 0 || k == nodes - 1 ? 0.5 : 1.0) * std::exp(p.values(k, 0));
  EXPECT_NEAR(integral * h, 1.0, 0.01);
}

TEST_F(CliPredict, EmptyQueryGivesEmptyOutput) {
  const auto q = write("empty.csv", "");
  const auto r = vbl_run({"predict", "--model", path("rep/model.txt"), "--query", q, "--out", path("p.csv")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("p.csv")));
  EXPECT_EQ(fs::file_size(path("p.csv")), 0u);
}

TEST_F(CliPredict, ColumnMismatchIsUsageError) {
  const auto q = write("q.csv", "x0,x1\n1.0,2.0\n");
  EXPECT_EQ(vbl_run({"predict", "--model", path("rep/model.txt"), "--query", q, "--out", path("p.csv")}).code, 2);
  EXPECT_EQ(vbl_run({"predict", "--model", path("nope.txt"), "--query", q, "--out", path("p.csv")}).code, 2);
}

// ---- top level --------------------------------------------------------------------------

TEST_F(Cli, HelpAndMissingSubcommand) {
  const auto help = vbl_run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("fit-gmm"), std::string::npos);
  EXPECT_EQ(vbl_run({}).code, 2);
  EXPECT_EQ(vbl_run({"frobnicate"}).code, 2);
}

}  // namespace
