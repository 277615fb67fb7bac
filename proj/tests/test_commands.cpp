#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "homeostat/commands.hpp"

using namespace homeostat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "homeostat_cmd_test" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      f.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  f.push_back(cur);
  return f;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(split(line));
  return rows;
}

RunConfig config_for(const fs::path& out, const std::string& text = "{}") {
  auto c = parse_config(text);
  c.output_dir = out.string();
  return c;
}

int run(const std::string& command, const RunConfig& cfg, std::string* log_text = nullptr) {
  std::ostringstream log;
  const int rc = dispatch(command, cfg, log);
  if (log_text) *log_text = log.str();
  return rc;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

/// Numeric fields must be the %.17g rendering of the value they parse to.
void expect_csv_format(const fs::path& p) {
  const auto rows = read_csv(p);
  ASSERT_GE(rows.size(), 2u) << p;
  const std::regex name("[A-Za-z_][A-Za-z0-9_]*");
  for (const auto& h : rows[0]) EXPECT_TRUE(std::regex_match(h, name)) << p << " header " << h;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    ASSERT_EQ(rows[r].size(), rows[0].size()) << p << " row " << r;
    for (const auto& f : rows[r]) {
      if (f.empty()) continue;
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end != f.c_str() + f.size()) continue;  // text field
      EXPECT_EQ(format_double(v), f) << p << " row " << r;
    }
  }
}

const std::vector<std::string>& quick_commands() {
  static const std::vector<std::string> c{"simulate-pde", "simulate-ode", "equilibrium", "scan",
                                          "gain-scale",   "calibrate",    "regenerate"};
  return c;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(HOMEOSTAT_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Dispatch, EquilibriumDefaults) {
  const auto out = scratch("equilibrium");
  ASSERT_EQ(run("equilibrium", config_for(out)), kExitOk);
  const auto j = read_json(out / "equilibrium.json");
  ASSERT_EQ(j.at("equilibria").size(), 1u);
  const auto& e = j.at("equilibria")[0];
  EXPECT_NEAR(e.at("pstar").get<double>(), 6.4945, 1e-3);
  EXPECT_NEAR(e.at("wstar").get<double>(), 3.3753, 1e-3);
  for (const char* k : {"res_equalization", "res_ratio", "res_rhs_p", "res_rhs_w"}) {
    ASSERT_TRUE(e.contains(k)) << k;
    EXPECT_LT(std::abs(e[k].get<double>()), 1e-15) << k;
  }
  EXPECT_TRUE(e.at("accepted").get<bool>());
  EXPECT_EQ(j.at("origin").at("regime"), "growth");
}

TEST(Dispatch, EveryCommandEchoesEffectiveConfig) {
  for (const auto& c : quick_commands()) {
    const auto out = scratch("echo_" + c);
    const auto cfg = config_for(out);
    ASSERT_EQ(run(c, cfg), kExitOk) << c;
    const auto echo = read_json(out / "config.effective.json");
    EXPECT_EQ(echo.dump(), to_json(cfg).dump()) << c;
    EXPECT_EQ(parse_config(echo).model, cfg.model) << c;
  }
}

TEST(Dispatch, CsvHeadersAndSeventeenDigits) {
  for (const auto& c : quick_commands()) {
    const auto out = scratch("csv_" + c);
    ASSERT_EQ(run(c, config_for(out)), kExitOk) << c;
    for (const auto& e : fs::directory_iterator(out)) {
      if (e.path().extension() == ".csv") expect_csv_format(e.path());
    }
  }
}

TEST(Dispatch, ByteIdenticalReruns) {
  for (const auto& c : quick_commands()) {
    const auto out = scratch("det_" + c);
    const auto cfg = config_for(out);
    ASSERT_EQ(run(c, cfg), kExitOk) << c;
    const auto first = snapshot_dir(out);
    fs::remove_all(out);
    ASSERT_EQ(run(c, cfg), kExitOk) << c;
    EXPECT_EQ(snapshot_dir(out), first) << c;
  }
}

TEST(Dispatch, SimulateOdeFromOriginIsZero) {
  const auto out = scratch("ode_zero");
  ASSERT_EQ(run("simulate-ode", config_for(out, R"({"initial": {"pbar": 0, "wbar": 0}})")), kExitOk);
  const auto rows = read_csv(out / "trajectory.csv");
  ASSERT_EQ(rows[0], (std::vector<std::string>{"t", "pbar", "wbar", "mass", "s", "fP", "fW"}));
  ASSERT_EQ(rows.size(), 1001u);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    EXPECT_EQ(rows[r][1], "0");
    EXPECT_EQ(rows[r][2], "0");
    EXPECT_EQ(rows[r][3], "0");
  }
}

TEST(Dispatch, SimulatePdeArtifacts) {
  const auto out = scratch("pde");
  ASSERT_EQ(run("simulate-pde", config_for(out, R"({"solver": {"nx": 200, "horizon": 2,
                                                              "snapshots": [0, 1, 2]}})")),
            kExitOk);
  for (const char* f : {"totals.csv", "snapshot_000.csv", "snapshot_001.csv", "snapshot_002.csv",
                        "summary.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(read_csv(out / "snapshot_001.csv").size(), 201u);
  EXPECT_EQ(read_csv(out / "totals.csv")[0],
            (std::vector<std::string>{"t", "pbar_h", "wbar_h", "rP", "rW", "rM", "delta_eff",
                                      "mass_defect"}));
}

TEST(Dispatch, ScanRecordsGapsAndSwitch) {
  const auto out = scratch("scan");
  ASSERT_EQ(run("scan", config_for(out)), kExitOk);
  const auto j = read_json(out / "scan.json");
  ASSERT_EQ(j.at("regime_switches").size(), 1u);
  EXPECT_EQ(j.at("regime_switches")[0].at("regimes"), json::array({"extinction", "growth"}));
  const auto rows = read_csv(out / "scan.csv");
  std::size_t gaps = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r][10].empty()) {
      ++gaps;
      EXPECT_TRUE(rows[r][11].empty());
      EXPECT_FALSE(rows[r][12].empty());
    }
  }
  EXPECT_GT(gaps, 0u);
}

TEST(Dispatch, CalibratedConfigReproducesTarget) {
  const auto out = scratch("calibrate");
  ASSERT_EQ(run("calibrate", config_for(out)), kExitOk);
  const auto j = read_json(out / "calibration.json");
  EXPECT_TRUE(j.at("accepted").get<bool>());
  const auto cfg = load_config((out / "calibrated_config.json").string());
  const auto eq = unique_equilibrium(cfg.model, cfg.search());
  ASSERT_TRUE(eq);
  EXPECT_NEAR(eq->pstar / 14.0, 1.0, 1e-9);
  EXPECT_NEAR(eq->wstar / 278.0, 1.0, 1e-9);
}

TEST(Dispatch, UnknownCommandLeavesNoArtifacts) {
  const auto out = scratch("unknown");
  EXPECT_THROW(run("simulate", config_for(out)), ConfigError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Dispatch, NonUniformDeathRejectedByClosureCommands) {
  const auto out = scratch("ramp_ode");
  const auto cfg = config_for(out, R"({"model": {"delta": {"profile": "linear_ramp", "rate": 0.5}}})");
  EXPECT_THROW(run("simulate-ode", cfg), UnsupportedConfiguration);
  EXPECT_EQ(run("simulate-pde", config_for(scratch("ramp_pde"),
                                           R"({"model": {"delta": {"profile": "linear_ramp", "rate": 0.5}},
                                               "solver": {"nx": 100, "horizon": 1}})")),
            kExitOk);
}

// ---------------------------------------------------------------- verify

TEST(Verify, DefaultsReportKnownFailures) {
  const auto out = scratch("verify");
  std::string log;
  EXPECT_EQ(run("verify", config_for(out), &log), kExitCheckFailed);
  const auto j = read_json(out / "verification.json");
  EXPECT_FALSE(j.at("passed").get<bool>());
  ASSERT_EQ(j.at("checks").size(), 14u);
  std::vector<std::string> failing;
  for (const auto& c : j.at("checks")) {
    EXPECT_NE(c.at("status"), "skipped") << c.at("name");
    EXPECT_FALSE(c.at("reduced_scale").get<bool>()) << c.at("name");
    if (c.at("status") == "fail") failing.push_back(c.at("name"));
  }
  EXPECT_EQ(failing, (std::vector<std::string>{"balance_residuals", "slope_dominance"}));
  EXPECT_NE(log.find("verification FAILED (12 pass, 2 fail, 0 skipped)"), std::string::npos);
}

TEST(Verify, OnlyRuntimeFieldsVaryBetweenRuns) {
  auto strip = [](json j) {
    for (auto& c : j.at("checks")) c.erase("runtime_s");
    return j.dump();
  };
  const auto out = scratch("verify_det");
  run("verify", config_for(out));
  const auto a = read_json(out / "verification.json");
  run("verify", config_for(out));
  EXPECT_EQ(strip(read_json(out / "verification.json")), strip(a));
}

TEST(Verify, RampDeathBreaksClosureChecksOnly) {
  const auto out = scratch("verify_ramp");
  const auto cfg = config_for(out, R"({"model": {"delta": {"profile": "linear_ramp", "rate": 0.5}},
                                       "solver": {"xmax": 20}})");
  EXPECT_EQ(run("verify", cfg), kExitCheckFailed);
  const auto j = read_json(out / "verification.json");
  for (const auto& c : j.at("checks")) {
    const std::string name = c.at("name");
    const std::string status = c.at("status");
    if (name == "delta_eff_uniformity" || name == "closure_error" || name == "balance_residuals") {
      EXPECT_EQ(status, "fail") << name;
    } else if (status == "skipped") {
      EXPECT_FALSE(c.at("detail").get<std::string>().empty()) << name;
    } else {
      EXPECT_EQ(status, "pass") << name;
    }
  }
}

TEST(Verify, FastProfileMarksReducedScale) {
  const auto out = scratch("verify_fast");
  std::ostringstream log;
  CommandOptions opt;
  opt.verify.nx_cap = kFastNxCap;
  dispatch("verify", config_for(out), log, opt);
  const auto j = read_json(out / "verification.json");
  std::map<std::string, bool> reduced;
  for (const auto& c : j.at("checks")) reduced[c.at("name")] = c.at("reduced_scale");
  EXPECT_TRUE(reduced.at("grid_convergence"));
  EXPECT_TRUE(reduced.at("closure_error"));
  EXPECT_FALSE(reduced.at("equilibrium_certification"));
  EXPECT_FALSE(reduced.at("gain_scaling"));
  EXPECT_NE(log.str().find("[reduced-scale]"), std::string::npos);
}

// ------------------------------------------------------------ CLI binary

TEST(Cli, ExitCodes) {
  const auto out = scratch("cli").string();
  const std::string cfgs = HOMEOSTAT_CONFIGS;
  EXPECT_EQ(cli("equilibrium --out " + out), 0);
  EXPECT_EQ(cli("equilibrium --config " + cfgs + "/crypt.json --out " + out), 0);
  EXPECT_EQ(cli("equilibrium --bogus"), 2);
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("equilibrium --config /nonexistent.json"), 2);
  EXPECT_EQ(cli("equilibrium --grid nx=1 --out " + out), 2);
  EXPECT_EQ(cli("verify --fast --full --out " + out), 2);
  EXPECT_EQ(cli("simulate-ode --config " + cfgs + "/ramp_death.json --out " + out), 2);

  const auto bad = fs::path(out) / "bad.json";
  fs::create_directories(out);
  std::ofstream(bad) << R"({"solver": {"cfl": 1.5}})";
  EXPECT_EQ(cli("equilibrium --config " + bad.string() + " --out " + out), 2);
  std::ofstream(bad) << "{ nope";
  EXPECT_EQ(cli("equilibrium --config " + bad.string() + " --out " + out), 2);
}

TEST(Cli, OverridesReachEffectiveConfig) {
  const auto out = scratch("cli_overrides");
  ASSERT_EQ(cli("scan --scan-range -0.7:-0.5 --depletion 0.3 --grid nx=64,xmax=12 --out " +
                out.string()),
            0);
  const auto echo = read_json(out / "config.effective.json");
  EXPECT_EQ(echo.at("experiment").at("range"), json::array({-0.7, -0.5}));
  EXPECT_EQ(echo.at("experiment").at("depletion"), 0.3);
  EXPECT_EQ(echo.at("solver").at("nx"), 64);
  EXPECT_EQ(echo.at("solver").at("xmax"), 12.0);
  EXPECT_EQ(echo.at("output").at("dir"), out.string());
}

TEST(Cli, SampleConfigsParse) {
  for (const auto& e : fs::directory_iterator(HOMEOSTAT_CONFIGS)) {
    if (e.path().extension() == ".json") {
      EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    }
  }
}
