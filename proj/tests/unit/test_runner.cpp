#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ionmem/config.hpp"
#include "ionmem/csv.hpp"
#include "ionmem/runner.hpp"

using namespace ionmem;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class RunnerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ionmem_runner_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  RunReport run_text(const std::string& text) {
    RunOptions options;
    options.base_dir = dir_;
    return run(parse_config(text), options);
  }

  fs::path dir_;
};

const char* kStorage = R"(experiment = storage
seed = 1
[noise]
dephasing = phenomenological
t2 = 0.4
[storage]
times = 0 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8
reps = 200
)";

}  // namespace

TEST_F(RunnerTest, StorageIsByteIdentical) {
  const auto a = run_text(kStorage);
  const std::string first = slurp(a.csv_path);
  const auto b = run_text(kStorage);
  EXPECT_EQ(first, slurp(b.csv_path));
  EXPECT_EQ(first, a.csv);
  EXPECT_EQ(first.substr(0, first.find('\n')), "time_s,fidelity,stderr,reps");
}

TEST_F(RunnerTest, MetadataRecordsConfigSeedAndVersion) {
  const auto r = run_text(kStorage);
  const auto meta = nlohmann::json::parse(slurp(r.metadata_path));
  EXPECT_EQ(meta["seed"], 1);
  EXPECT_EQ(meta["experiment"], "storage");
  EXPECT_EQ(meta["version"], artifact_version());
  EXPECT_EQ(meta["config"], kStorage);
  EXPECT_EQ(meta["summary"]["reps"], 200);
}

TEST_F(RunnerTest, FitOfStorageOutput) {
  run_text(kStorage);
  const auto r = run_text("experiment = fit\nseed = 1\n[fit]\ninput = storage.csv\nmodel = exp-offset\n");
  EXPECT_EQ(r.csv.substr(0, r.csv.find('\n')), "param,value,stderr");
  EXPECT_EQ(std::count(r.csv.begin(), r.csv.end(), '\n'), 4);
  EXPECT_NE(r.csv.find("\nT,"), std::string::npos);
  const auto summary = nlohmann::json::parse(r.summary);
  const double t2 = summary["params"]["T"]["value"];
  const double err = summary["params"]["T"]["stderr"];
  EXPECT_NEAR(t2, 0.4, 4.0 * err);
}

TEST_F(RunnerTest, ModesAndReadoutCsv) {
  const auto modes = run_text(R"(experiment = modes
seed = 2
[trap]
omega_x = 2*pi*5e6
omega_y = 2*pi*4.8e6
axial = harmonic
omega_z = 2*pi*0.2e6
mass_amu = 170.936
[crystal]
ions = 4
)");
  const auto table = parse_csv(modes.csv);
  ASSERT_EQ(table.rows.size(), 12u);
  EXPECT_NEAR(table.rows[0][1], 2.0 * constants::kPi * 0.2e6, 1e-3);

  const auto readout = run_text(
      "experiment = readout\nseed = 1\n[detection]\ncooling_on = false\ntimes = 0 0.3\n");
  const auto curve = parse_csv(readout.csv);
  EXPECT_GT(curve.column("readout_error")[1], 10.0 * curve.column("readout_error")[0]);
}

TEST_F(RunnerTest, MissingFitInputFails) {
  EXPECT_THROW(run_text("experiment = fit\nseed = 1\n[fit]\ninput = absent.csv\nmodel = exp\n"), std::runtime_error);
}

TEST(CsvTest, FormatAndParse) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(0.25), "0.25");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  const auto t = parse_csv("a,b\n1,2\n3,4.5\n");
  EXPECT_EQ(t.column("b"), (std::vector<double>{2.0, 4.5}));
  EXPECT_THROW(t.column("c"), std::out_of_range);
  EXPECT_THROW(parse_csv("a,b\n1\n"), std::runtime_error);
  EXPECT_THROW(parse_csv("a,b\n1,x\n"), std::runtime_error);
}
