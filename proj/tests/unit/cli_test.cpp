#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <unistd.h>

#include "quadshift/pipeline.hpp"

using namespace quadshift;
namespace fs = std::filesystem;

namespace {

json small_scenario() {
  return json::parse(R"({
    "schema": 1,
    "name": "small",
    "grid": {"x_min": -10, "x_max": 10, "n": 256},
    "time": {"t0": 0, "t_end": 0.2, "dt": 0.01, "output_stride": 5},
    "coefficients": {"a": 1, "g": 1},
    "packet": {"x0": 0, "p0": 0, "sigma": 1},
    "outputs": {"snapshots": [0, 0.1]}
  })");
}

class Workspace : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("quadshift_test_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const json& doc) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  int cli(const std::string& args) const {
    const std::string cmd = std::string(QUADSHIFT_CLI) + " " + args + " > " +
                            (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& p) const {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string stderr_text() const { return read(dir_ / "stderr.txt"); }

  fs::path dir_;
};

std::string config_error_field(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseScenario, DefaultsAndResolvedEcho) {
  const auto sc = parse_scenario(small_scenario());
  EXPECT_EQ(sc.name, "small");
  EXPECT_EQ(sc.grid.size(), 256u);
  EXPECT_DOUBLE_EQ(sc.params.hbar, 1.0);
  EXPECT_DOUBLE_EQ(sc.tolerances.residual, 1e-4);
  EXPECT_EQ(sc.discretization.stencil_order, default_stencil_order);
  const json echo = to_json(sc);
  const auto again = parse_scenario(echo);
  EXPECT_EQ(to_json(again), echo);
}

TEST(ParseScenario, CoefficientSegments) {
  auto doc = small_scenario();
  doc["coefficients"]["g"] = json::parse(R"({"segments": [
    {"poly": [1.0, 0.5]},
    {"t_start": 0.1, "sin": [{"amp": 2.0, "omega": 3.0, "phase": 0.1}]}]})");
  const auto sc = parse_scenario(doc);
  EXPECT_DOUBLE_EQ(sc.coefficients.g(0.05), 1.0 + 0.5 * 0.05);
  EXPECT_NEAR(sc.coefficients.g(0.15), 2.0 * std::sin(3.0 * 0.05 + 0.1), 1e-15);
}

TEST(ParseScenario, ErrorsNameTheField) {
  auto doc = small_scenario();
  doc["grid"]["n"] = 100;
  EXPECT_NE(config_error_field(doc).find("grid.n"), std::string::npos);

  doc = small_scenario();
  doc["packet"]["sigmaa"] = 1.0;
  EXPECT_NE(config_error_field(doc).find("packet.sigmaa"), std::string::npos);

  doc = small_scenario();
  doc["coefficients"]["a"] = json::parse(R"({"segments": [{"poly": [1.0, -10.0]}]})");
  EXPECT_NE(config_error_field(doc).find("coefficients.a"), std::string::npos);

  doc = small_scenario();
  doc["coefficients"].erase("a");
  EXPECT_NE(config_error_field(doc).find("coefficients.a"), std::string::npos);

  doc = small_scenario();
  doc["schema"] = 2;
  EXPECT_NE(config_error_field(doc).find("schema"), std::string::npos);

  doc = small_scenario();
  doc["propagator"] = {{"stencil_order", 7}};
  EXPECT_NE(config_error_field(doc).find("propagator.stencil_order"), std::string::npos);

  doc = small_scenario();
  doc["time"]["dt"] = -0.1;
  EXPECT_NE(config_error_field(doc).find("time.dt"), std::string::npos);
}

TEST(ParseSweep, RejectsDuplicatesAndUnsafeNames) {
  EXPECT_THROW(parse_sweep(json::parse(R"([{"name": "a"}, {"name": "a"}])")), ConfigError);
  EXPECT_THROW(parse_sweep(json::parse(R"([{"name": "../x"}])")), ConfigError);
  EXPECT_THROW(parse_sweep(json::parse(R"({"command": "plot", "runs": []})")), ConfigError);
  const auto plan = parse_sweep(json::parse(R"({"command": "verify", "runs": [{"name": "a"}]})"));
  EXPECT_EQ(plan.command, "verify");
  ASSERT_EQ(plan.entries.size(), 1u);
  EXPECT_TRUE(plan.entries[0].patch.is_object());
}

TEST_F(Workspace, RunWritesSeriesSnapshotsAndSummary) {
  const auto cfg = write("s.json", small_scenario());
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "out").string()), 0);
  const auto series = read(dir_ / "out" / "series.csv");
  EXPECT_EQ(series.substr(0, series.find('\n')), "t,norm,mean_x,mean_p,var_x,cov,var_p,leak");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "snapshots" / "psi_0.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "snapshots" / "psi_0.1.csv"));
  const auto summary = json::parse(read(dir_ / "out" / "summary.json"));
  EXPECT_EQ(summary.at("steps"), 20);
  EXPECT_EQ(summary.at("scenario").at("grid").at("n"), 256);
  EXPECT_NEAR(summary.at("final").at("norm").get<double>(), 1.0, 1e-12);
}

TEST_F(Workspace, RunIsDeterministic) {
  const auto cfg = write("s.json", small_scenario());
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "b").string()), 0);
  EXPECT_EQ(read(dir_ / "a" / "series.csv"), read(dir_ / "b" / "series.csv"));
  EXPECT_EQ(read(dir_ / "a" / "snapshots" / "psi_0.1.csv"),
            read(dir_ / "b" / "snapshots" / "psi_0.1.csv"));
  auto sa = json::parse(read(dir_ / "a" / "summary.json"));
  auto sb = json::parse(read(dir_ / "b" / "summary.json"));
  sa.erase("runtime_seconds");
  sb.erase("runtime_seconds");
  EXPECT_EQ(sa, sb);
}

TEST_F(Workspace, InvalidConfigExitsTwoAndNamesField) {
  auto doc = small_scenario();
  doc["grid"]["n"] = 100;
  const auto cfg = write("s.json", doc);
  EXPECT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "out").string()), 2);
  EXPECT_NE(stderr_text().find("grid.n"), std::string::npos);
}

TEST_F(Workspace, MissingConfigAndMalformedJsonExitTwo) {
  EXPECT_EQ(cli("run --config " + (dir_ / "absent.json").string()), 2);
  std::ofstream(dir_ / "bad.json") << "{ not json";
  EXPECT_EQ(cli("run --config " + (dir_ / "bad.json").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
}

TEST_F(Workspace, PacketAtEdgeIsRuntimeError) {
  auto doc = small_scenario();
  doc["packet"]["x0"] = 10;
  const auto cfg = write("s.json", doc);
  EXPECT_EQ(cli("run --config " + cfg.string() + " --out " + (dir_ / "out").string()), 3);
}

TEST_F(Workspace, VerifyPassesAndWritesReport) {
  const auto cfg = write("s.json", small_scenario());
  ASSERT_EQ(cli("verify --config " + cfg.string() + " --out " + (dir_ / "out").string()), 0);
  const auto report = json::parse(read(dir_ / "out" / "verify.json"));
  EXPECT_TRUE(report.at("pass").get<bool>());
  EXPECT_LE(report.at("summary").at("max_position_residual").get<double>(), 1e-4);
  EXPECT_FALSE(report.at("records").empty());
}

TEST_F(Workspace, VerifyWithoutLinearTermsIsConfigError) {
  auto doc = small_scenario();
  doc["coefficients"].erase("g");
  const auto cfg = write("s.json", doc);
  EXPECT_EQ(cli("verify --config " + cfg.string() + " --out " + (dir_ / "out").string()), 2);
  EXPECT_NE(stderr_text().find("coefficients"), std::string::npos);
}

TEST_F(Workspace, CorruptedBetaFailsVerify) {
  const auto cfg = write("s.json", small_scenario());
  const std::string pi = std::to_string(std::numbers::pi);
  EXPECT_EQ(cli("verify --config " + cfg.string() + " --out " + (dir_ / "out").string() +
                " --corrupt-beta " + pi),
            1);
  const auto report = json::parse(read(dir_ / "out" / "verify.json"));
  EXPECT_FALSE(report.at("pass").get<bool>());
  EXPECT_NEAR(report.at("summary").at("max_position_residual").get<double>(), 2.0, 1e-5);
}

TEST_F(Workspace, ConvergenceNeedsThreeLevels) {
  const auto cfg = write("s.json", small_scenario());
  EXPECT_EQ(cli("convergence --levels 1 --config " + cfg.string() + " --out " +
                (dir_ / "out").string()),
            2);
  EXPECT_NE(stderr_text().find("levels"), std::string::npos);
}

TEST_F(Workspace, ConvergenceMarksResidualFloor) {
  const auto cfg = write("s.json", small_scenario());
  ASSERT_EQ(cli("convergence --levels 3 --config " + cfg.string() + " --out " +
                (dir_ / "out").string()),
            0);
  const auto table = read(dir_ / "out" / "convergence.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')),
            "level,dt,steps,position_residual,momentum_residual,position_order,momentum_order");
  EXPECT_NE(table.find("floor"), std::string::npos);
}

TEST_F(Workspace, SweepRunsEveryEntryAndRecordsFailures) {
  const auto cfg = write("s.json", small_scenario());
  json runs = json::array();
  for (int i = 1; i <= 7; ++i) {
    runs.push_back({{"name", "g" + std::to_string(i)},
                    {"patch", {{"coefficients", {{"g", 0.25 * i}}}}}});
  }
  runs.push_back({{"name", "broken"}, {"patch", {{"grid", {{"n", 100}}}}}});
  const auto ov = write("o.json", {{"command", "verify"}, {"runs", runs}});
  const fs::path out = dir_ / "sweep";
  ASSERT_EQ(cli("sweep --jobs 2 --config " + cfg.string() + " --overrides " + ov.string() +
                " --out " + out.string()),
            0);
  const auto manifest = json::parse(read(out / "manifest.json"));
  ASSERT_EQ(manifest.at("count"), 8);
  const auto& entries = manifest.at("entries");
  for (int i = 0; i < 7; ++i) {
    EXPECT_EQ(entries[i].at("name"), "g" + std::to_string(i + 1));
    EXPECT_EQ(entries[i].at("status"), "ok");
    EXPECT_TRUE(fs::exists(out / entries[i].at("directory").get<std::string>() / "verify.json"));
  }
  EXPECT_EQ(entries[7].at("status"), "config-error");
  EXPECT_EQ(entries[7].at("exit_code"), 2);
  EXPECT_NE(entries[7].at("error").get<std::string>().find("grid.n"), std::string::npos);
}

TEST_F(Workspace, SweepWithDuplicateNamesRunsNothing) {
  const auto cfg = write("s.json", small_scenario());
  const auto ov = write("o.json", json::parse(R"([{"name": "x"}, {"name": "x"}])"));
  const fs::path out = dir_ / "sweep";
  EXPECT_EQ(cli("sweep --config " + cfg.string() + " --overrides " + ov.string() + " --out " +
                out.string()),
            2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(stderr_text().find("overrides.runs[1].name"), std::string::npos);
}

TEST(ShippedConfigs, AllParse) {
  for (const auto& entry : fs::directory_iterator(QUADSHIFT_CONFIGS)) {
    if (entry.path().extension() != ".json") continue;
    const auto doc = load_json(entry.path());
    if (entry.path().filename().string().rfind("sweep_", 0) == 0) {
      EXPECT_NO_THROW(parse_sweep(doc)) << entry.path();
    } else {
      EXPECT_NO_THROW(parse_scenario(doc)) << entry.path();
    }
  }
}
