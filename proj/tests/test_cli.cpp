#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "histfun/cli.hpp"
#include "histfun/io.hpp"

namespace fs = std::filesystem;
using histfun::cli::run;
using histfun::io::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("histfun_cli_" + std::to_string(::getpid()) + "_" +
                                         ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string dir(const std::string& name) const { return (root_ / name).string(); }

  void simulate(const std::string& out, int scenario = 1) {
    ASSERT_EQ(run({"simulate", "--scenario", std::to_string(scenario), "--N", "16", "--grid-points", "33", "--seed",
                   "7", "--out", out}),
              0);
  }

  fs::path root_;
};

}  // namespace

TEST_F(CliTest, SimulateIsByteReproducible) {
  simulate(dir("a"));
  simulate(dir("b"));
  for (const char* f : {"x.csv", "y.csv", "truth.json"}) {
    EXPECT_EQ(slurp(fs::path(dir("a")) / f), slurp(fs::path(dir("b")) / f)) << f;
  }
  const auto x = histfun::io::read_sample_csv(dir("a") + "/x.csv", histfun::CurveRole::kCovariate);
  EXPECT_EQ(x.num_curves(), 16);
  EXPECT_EQ(x.num_points(), 33);
}

TEST_F(CliTest, CsvRoundTripIsExact) {
  simulate(dir("a"));
  const auto y = histfun::io::read_sample_csv(dir("a") + "/y.csv", histfun::CurveRole::kResponse);
  histfun::io::write_sample_csv(dir("copy.csv"), y);
  const auto back = histfun::io::read_sample_csv(dir("copy.csv"), histfun::CurveRole::kResponse);
  EXPECT_EQ(back.values, y.values);
  EXPECT_EQ(back.grid, y.grid);
}

TEST_F(CliTest, FitWritesQuantizedLag) {
  simulate(dir("data"));
  ASSERT_EQ(run({"fit", "--in-x", dir("data") + "/x.csv", "--in-y", dir("data") + "/y.csv", "--M", "10", "--lambda",
                 "1", "--omega", "0.01", "--out", dir("fit")}),
            0);
  const json fit = histfun::io::read_json(dir("fit") + "/fit.json");
  const double units = fit["delta_hat"].get<double>() * 10.0;
  EXPECT_NEAR(units, std::round(units), 1e-12);
  EXPECT_GE(units, 1.0 - 1e-12);
  EXPECT_EQ(fit["b"].size(), 66u);
  EXPECT_TRUE(fs::exists(dir("fit") + "/beta_grid.csv"));
  EXPECT_TRUE(fs::exists(dir("fit") + "/fit_log.jsonl"));
}

TEST_F(CliTest, TuneThenBootstrapOrdersInterval) {
  simulate(dir("data"));
  const std::string x = dir("data") + "/x.csv", y = dir("data") + "/y.csv";
  ASSERT_EQ(run({"tune", "--in-x", x, "--in-y", y, "--M", "6", "--lambda-grid", "0.1,1,10", "--omega-grid",
                 "0.001,0.1", "--threads", "2", "--out", dir("tune")}),
            0);
  EXPECT_TRUE(fs::exists(dir("tune") + "/tuning.csv"));
  ASSERT_EQ(run({"bootstrap", "--in-x", x, "--in-y", y, "--fit", dir("tune") + "/fit.json", "--B", "40", "--level",
                 "0.95", "--seed", "3", "--out", dir("boot")}),
            0);
  const json ci = histfun::io::read_json(dir("boot") + "/ci.json");
  EXPECT_LE(ci["lower"].get<double>(), ci["delta_hat"].get<double>());
  EXPECT_LE(ci["delta_hat"].get<double>(), ci["upper"].get<double>());
  ASSERT_EQ(run({"bootstrap", "--in-x", x, "--in-y", y, "--fit", dir("tune") + "/fit.json", "--B", "40", "--seed",
                 "3", "--threads", "1", "--out", dir("boot2")}),
            0);
  EXPECT_EQ(slurp(dir("boot") + "/ci.json"), slurp(dir("boot2") + "/ci.json"));
  EXPECT_EQ(slurp(dir("boot") + "/deltas.csv"), slurp(dir("boot2") + "/deltas.csv"));
}

TEST_F(CliTest, ReportAggregatesFits) {
  std::vector<std::string> fits;
  for (int r = 0; r < 3; ++r) {
    const std::string d = dir("rep" + std::to_string(r));
    ASSERT_EQ(run({"simulate", "--N", "12", "--grid-points", "33", "--seed", "5", "--replication", std::to_string(r),
                   "--out", d}),
              0);
    ASSERT_EQ(run({"fit", "--in-x", d + "/x.csv", "--in-y", d + "/y.csv", "--M", "5", "--lambda", "1", "--out", d}), 0);
    fits.push_back(d + "/fit.json");
  }
  std::vector<std::string> args{"report", "--truth", dir("rep0") + "/truth.json", "--out", dir("report"), "--fits"};
  args.insert(args.end(), fits.begin(), fits.end());
  ASSERT_EQ(run(args), 0);
  const std::string csv = slurp(dir("report") + "/metrics.csv");
  EXPECT_NE(csv.find("scenario,delta,replications,rmse"), std::string::npos);
}

TEST_F(CliTest, ErrorsAreMachineReadable) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"fit", "--bogus"}), 2);
  json err = json::parse(::testing::internal::GetCapturedStderr());
  EXPECT_EQ(err["error"]["kind"], "usage");

  std::ofstream(dir("bad.csv")) << "0,0.5,1\n1,2\n";
  std::ofstream(dir("good.csv")) << "0,0.5,1\n1,2,3\n4,5,6\n";
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"fit", "--in-x", dir("bad.csv"), "--in-y", dir("good.csv"), "--out", dir("o")}), 1);
  err = json::parse(::testing::internal::GetCapturedStderr());
  EXPECT_EQ(err["error"]["kind"], "data");

  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"simulate", "--out", dir("o")}), 2);  // --seed is mandatory
  ::testing::internal::GetCapturedStderr();

  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"fit", "--in-x", dir("missing.csv"), "--in-y", dir("good.csv")}), 1);
  err = json::parse(::testing::internal::GetCapturedStderr());
  EXPECT_EQ(err["error"]["kind"], "invalid_config");
}
