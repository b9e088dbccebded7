#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = FOSEP_CLI;
const std::string kConfigs = FOSEP_CONFIG_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome run_cli(const std::string& args) {
  const fs::path dir = fs::current_path() / "cli_streams";
  fs::create_directories(dir);
  const std::string cmd = "'" + kCli + "' " + args + " > '" + (dir / "out.txt").string() + "' 2> '" +
                          (dir / "err.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir / "out.txt"), slurp(dir / "err.txt")};
}

fs::path fresh(const std::string& name) {
  const fs::path p = fs::current_path() / "cli_out" / name;
  fs::remove_all(p);
  return p;
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::vector<std::string>& header) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  header.clear();
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) header.push_back(c);
  std::vector<std::vector<double>> cols(header.size());
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::size_t i = 0;
    for (std::string c; std::getline(ls, c, ','); ++i) cols[i].push_back(std::stod(c));
  }
  return cols;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string config(const std::string& name) { return "--config '" + kConfigs + "/" + name + "'"; }

}  // namespace

TEST(Cli, RunWritesAllArtifacts) {
  const fs::path out = fresh("tap");
  const Outcome o = run_cli("run " + config("table1.cfg") + " --alg tap --limits conservative --out '" + out.string() + "'");
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* f : {"trajectory.csv", "ce.csv", "summary.json", "kinematics.svg", "ce.svg"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  std::vector<std::string> header;
  read_csv(out / "trajectory.csv", header);
  EXPECT_EQ(header, (std::vector<std::string>{"t", "s", "x_d", "y_d", "x_dm", "y_dm", "feedrate", "ax", "ay", "jx", "jy"}));
  const std::string traj = slurp(out / "trajectory.csv");
  EXPECT_EQ(traj.find('\r'), std::string::npos);
  const json summary = json::parse(slurp(out / "summary.json"));
  for (const char* key : {"algorithm", "cycle_time_s", "compute_time_s", "max_ce_estimated_um", "max_ce_simulated_um"}) {
    EXPECT_TRUE(summary.contains(key)) << key;
  }
  EXPECT_EQ(summary["algorithm"], "tap");
}

TEST(Cli, SummaryMaximaEqualCsvMaxima) {
  const fs::path out = fresh("fo_sep");
  const Outcome o = run_cli("run " + config("printer_circle.cfg") + " --out '" + out.string() + "'");
  ASSERT_EQ(o.code, 0) << o.err;
  std::vector<std::string> header;
  const auto cols = read_csv(out / "ce.csv", header);
  ASSERT_EQ(header, (std::vector<std::string>{"t", "ce_estimated", "ce_exact"}));
  const json summary = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary["max_ce_estimated_um"].get<double>(), max_abs(cols[1]));
  EXPECT_EQ(summary["max_ce_simulated_um"].get<double>(), max_abs(cols[2]));
  EXPECT_EQ(summary["algorithm"], "fo-sep");
  EXPECT_TRUE(summary.contains("max_ce_linearized_um"));
}

TEST(Cli, IdenticalConfigGivesByteIdenticalCsv) {
  const fs::path a = fresh("det_a");
  const fs::path b = fresh("det_b");
  ASSERT_EQ(run_cli("run " + config("printer_circle.cfg") + " --alg fo-time --out '" + a.string() + "'").code, 0);
  ASSERT_EQ(run_cli("run " + config("printer_circle.cfg") + " --alg fo-time --out '" + b.string() + "'").code, 0);
  EXPECT_EQ(slurp(a / "trajectory.csv"), slurp(b / "trajectory.csv"));
  EXPECT_EQ(slurp(a / "ce.csv"), slurp(b / "ce.csv"));
}

TEST(Cli, MalformedConfigExitsTwoWithoutOutputs) {
  const fs::path cfg = fs::current_path() / "negative_feedrate.cfg";
  std::ofstream(cfg) << R"({"limit_sets": {"conservative": {"feedrate_mm_s": -30, "acceleration_m_s2": 0.5, "jerk_m_s3": 5}},
                           "limits": "conservative", "init_fallback": []})";
  const fs::path out = fresh("malformed");
  const Outcome o = run_cli("run --config '" + cfg.string() + "' --out '" + out.string() + "'");
  EXPECT_EQ(o.code, 2);
  EXPECT_EQ(o.err.rfind("error=config", 0), 0u) << o.err;
  EXPECT_EQ(std::count(o.err.begin(), o.err.end(), '\n'), 1);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(run_cli("run " + config("table1.cfg") + " --bogus").code, 2);
  EXPECT_EQ(run_cli("run " + config("table1.cfg") + " --ce-limit-um abc --out x").code, 2);
  EXPECT_EQ(run_cli("run " + config("table1.cfg") + " --alg fastest --out x").code, 2);
  EXPECT_EQ(run_cli("run --config /nonexistent.cfg --out x").code, 2);
  EXPECT_EQ(run_cli("compare " + config("table1.cfg") + " --suite table9 --out x").code, 2);
}

TEST(Cli, InfeasibleContourLimitExitsThreeWithFamily) {
  const fs::path out = fresh("infeasible");
  const Outcome o = run_cli("run " + config("printer_circle.cfg") + " --alg fo-time --ce-limit-um 0.0001 --out '" +
                            out.string() + "'");
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find("error=infeasible"), std::string::npos) << o.err;
  EXPECT_NE(o.err.find("family=contour"), std::string::npos) << o.err;
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, RankDeficientCompensatorExitsFour) {
  const fs::path cfg = fs::current_path() / "huge_fbs.cfg";
  std::ofstream(cfg) << R"({"limits": "aggressive", "fbs": {"x": {"control_points": 5000, "degree": 5}}})";
  const fs::path out = fresh("rank");
  const Outcome o = run_cli("run --config '" + cfg.string() + "' --out '" + out.string() + "'");
  EXPECT_EQ(o.code, 4);
  EXPECT_EQ(o.err.rfind("error=numerical", 0), 0u) << o.err;
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, CompareTable1HasFourRows) {
  const fs::path out = fresh("table1");
  const Outcome o = run_cli("compare " + config("table1.cfg") + " --suite table1 --out '" + out.string() + "'");
  ASSERT_EQ(o.code, 0) << o.err;
  const json report = json::parse(slurp(out / "report.json"));
  ASSERT_EQ(report.size(), 4u);
  for (const auto& row : report) {
    EXPECT_TRUE(fs::exists(out / row["directory"].get<std::string>() / "trajectory.csv"));
    EXPECT_GT(row["cycle_time_s"].get<double>(), 0.5);
  }
  const std::string txt = slurp(out / "report.txt");
  EXPECT_NE(txt.find("Time-based LP"), std::string::npos);
  EXPECT_NE(txt.find("Path-based LP"), std::string::npos);
  EXPECT_NE(txt.find("w/ jerk constraints"), std::string::npos);
}

TEST(Cli, SimulateReplaysWrittenTrajectory) {
  const fs::path run_dir = fresh("replay_src");
  ASSERT_EQ(run_cli("run " + config("printer_circle.cfg") + " --out '" + run_dir.string() + "'").code, 0);
  const fs::path out = fresh("replay");
  const Outcome o = run_cli("simulate " + config("printer_circle.cfg") + " --trajectory '" +
                            (run_dir / "trajectory.csv").string() + "' --out '" + out.string() + "'");
  ASSERT_EQ(o.code, 0) << o.err;
  const json a = json::parse(slurp(run_dir / "summary.json"));
  const json b = json::parse(slurp(out / "summary.json"));
  EXPECT_NEAR(a["max_ce_simulated_um"].get<double>(), b["max_ce_simulated_um"].get<double>(), 1e-4);
  EXPECT_TRUE(b["used_modified_commands"].get<bool>());
}

TEST(Cli, InfoPrintsModelDiagnostics) {
  const Outcome o = run_cli("info " + config("printer_circle.cfg"));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("raw_dc_gain"), std::string::npos);
  EXPECT_NE(o.out.find("condition_x"), std::string::npos);
  const Outcome raw = run_cli("info " + config("printer_circle.cfg") + " --no-dc-normalize");
  ASSERT_EQ(raw.code, 0) << raw.err;
  EXPECT_EQ(raw.out.find("used_dc_gain=1 "), std::string::npos) << raw.out;
  EXPECT_NE(o.out.find("used_dc_gain=1 "), std::string::npos) << o.out;
}
