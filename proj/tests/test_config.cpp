#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "homeostat/config.hpp"
#include "homeostat/csv.hpp"

using namespace homeostat;

namespace {

std::string error_path(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

}  // namespace

TEST(ParseConfig, EmptyDocumentGivesDefaults) {
  for (const std::string text : {"", "  \n", "{}"}) {
    const auto c = parse_config(text);
    EXPECT_EQ(c.model, reference_params());
    EXPECT_EQ(c.solver.cfl, 0.8);
    EXPECT_EQ(c.solver.reltol, 1e-10);
    EXPECT_EQ(c.solver.abstol, 1e-12);
    EXPECT_EQ(c.solver.xmax, 10.0);
    EXPECT_EQ(c.preset, "reference");
    EXPECT_FALSE(c.initial.pbar);
    EXPECT_EQ(c.output_dir, "out");
  }
}

TEST(ParseConfig, CryptOverrides) {
  const auto c = parse_config(R"({
    "model": {"delta": 0.25},
    "experiment": {"target": {"pstar": 14, "wstar": 278}}
  })");
  EXPECT_EQ(c.model.delta.uniform_rate(), 0.25);
  EXPECT_EQ(c.experiment.target.pstar, 14.0);
  EXPECT_EQ(c.experiment.target.wstar, 278.0);
  EXPECT_EQ(c.experiment.target.delta, 0.25);
  EXPECT_EQ(c.model.p1, reference_params().p1);
}

TEST(ParseConfig, CryptPreset) {
  const auto c = parse_config(R"({"preset": "crypt"})");
  EXPECT_EQ(c.model, crypt_params());
  EXPECT_EQ(error_path(R"({"preset": "mouse"})"), "preset");
}

TEST(ParseConfig, PartialHillOverrideKeepsOtherFields) {
  const auto c = parse_config(R"({"model": {"lambda_r": {"baseline": 0.1}}})");
  EXPECT_EQ(c.model.lambda_r.baseline, 0.1);
  EXPECT_EQ(c.model.lambda_r.gain, 0.5);
  EXPECT_EQ(c.model.lambda_r.exponent, 2.0);
}

TEST(ParseConfig, CflAboveOneRejected) {
  EXPECT_EQ(error_path(R"({"solver": {"cfl": 1.5}})"), "solver.cfl");
  EXPECT_EQ(error_path(R"({"solver": {"cfl": 0}})"), "solver.cfl");
  EXPECT_EQ(parse_config(R"({"solver": {"cfl": 1.0}})").solver.cfl, 1.0);
}

TEST(ParseConfig, UnknownKeysRejectedWithPath) {
  EXPECT_EQ(error_path(R"({"solvr": {}})"), "solvr");
  EXPECT_EQ(error_path(R"({"solver": {"nxx": 5}})"), "solver.nxx");
  EXPECT_EQ(error_path(R"({"model": {"p1": {"base": 0.1}}})"), "model.p1.base");
  EXPECT_EQ(error_path(R"({"experiment": {"target": {"p": 1}}})"), "experiment.target.p");
}

TEST(ParseConfig, TypeErrorsNamePath) {
  EXPECT_EQ(error_path(R"({"solver": {"nx": 10.5}})"), "solver.nx");
  EXPECT_EQ(error_path(R"({"solver": {"nx": -3}})"), "solver.nx");
  EXPECT_EQ(error_path(R"({"solver": {"xmax": "big"}})"), "solver.xmax");
  EXPECT_EQ(error_path(R"({"experiment": {"gains": [1, "x"]}})"), "experiment.gains[1]");
  EXPECT_EQ(error_path(R"({"experiment": {"divergence_csv": 1}})"), "experiment.divergence_csv");
}

TEST(ParseConfig, MalformedJson) {
  EXPECT_THROW(parse_config(std::string("{\"solver\": ")), ConfigError);
  EXPECT_THROW(parse_config(std::string("[1, 2]")), ConfigError);
}

TEST(ParseConfig, ModelInvariantsMapToConfigPaths) {
  EXPECT_EQ(error_path(R"({"model": {"p1": {"baseline": 0.7}}})"), "model.p1+p2");
  EXPECT_EQ(error_path(R"({"model": {"alpha": [0.4, 0.4]}})"), "model.alpha");
  EXPECT_EQ(error_path(R"({"model": {"v_p": 0}})"), "model.v_p");
}

TEST(ParseConfig, ExperimentAndInitialGuards) {
  EXPECT_EQ(error_path(R"({"initial": {"pbar": 1}})"), "initial");
  EXPECT_EQ(error_path(R"({"initial": {"pbar": -1, "wbar": 1}})"), "initial");
  EXPECT_EQ(error_path(R"({"experiment": {"range": [1, 0]}})"), "experiment.range");
  EXPECT_EQ(error_path(R"({"experiment": {"range": [1]}})"), "experiment.range");
  EXPECT_EQ(error_path(R"({"experiment": {"depletion": 0}})"), "experiment.depletion");
  EXPECT_EQ(error_path(R"({"experiment": {"gains": [1, -2]}})"), "experiment.gains");
  EXPECT_EQ(error_path(R"({"experiment": {"scan": "k"}})"), "experiment.scan");
  EXPECT_EQ(error_path(R"({"solver": {"snapshots": [6]}})"), "solver.snapshots");
}

TEST(ParseConfig, DeathProfiles) {
  const auto ramp = parse_config(R"({"model": {"delta": {"profile": "linear_ramp", "rate": 0.5}},
                                     "solver": {"xmax": 20}})");
  EXPECT_FALSE(ramp.model.delta.is_uniform());
  EXPECT_EQ(ramp.model.delta(0.0), 0.5);
  EXPECT_EQ(ramp.model.delta(20.0), 1.0);
  EXPECT_EQ(ramp.model.delta(10.0), 0.75);
  const auto tab = parse_config(
      R"({"model": {"delta": {"profile": "tabulated", "x": [0, 1, 2], "rates": [0.1, 0.2, 0.4]}}})");
  EXPECT_DOUBLE_EQ(tab.model.delta(1.5), 0.3);
  EXPECT_THROW(parse_config(R"({"model": {"delta": {"profile": "tabulated", "x": [0, 1], "rates": [1]}}})"),
               Error);
}

TEST(ParseConfig, ScanRangeDefaults) {
  EXPECT_EQ(parse_config("{}").scan_range(), (std::array<double, 2>{-0.8, 0.4}));
  EXPECT_EQ(parse_config(R"({"experiment": {"scan": "delta"}})").scan_range(),
            (std::array<double, 2>{0.1, 2.5}));
}

TEST(EffectiveConfig, EchoRoundTrips) {
  for (const std::string& text :
       {std::string("{}"), std::string(R"({"preset": "crypt", "solver": {"nx": 64, "snapshots": [0, 1]}})"),
        std::string(R"({"model": {"delta": {"profile": "linear_ramp", "rate": 0.3, "xmax": 7}},
                        "initial": {"pbar": 1, "wbar": 2}, "experiment": {"range": [-0.5, 0]}})")}) {
    const auto c = parse_config(text);
    const auto echo = to_json(c);
    const auto c2 = parse_config(echo);
    EXPECT_EQ(c2.model, c.model) << text;
    EXPECT_EQ(to_json(c2).dump(), echo.dump()) << text;
  }
}

TEST(EffectiveConfig, LoadFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "homeostat_config_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "c.json").string();
  std::ofstream(path) << R"({"solver": {"nx": 123}})";
  EXPECT_EQ(load_config(path).solver.nx, 123u);
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Csv, SeventeenDigitsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 6.4945015e-7, 1e300, -2.5}) {
    const auto s = format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
