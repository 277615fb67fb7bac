// Command-line front end: homeostat <command> [options]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "homeostat/commands.hpp"

namespace {

using homeostat::ConfigError;
using homeostat::json;

struct Overrides {
  std::string config;
  std::string out;
  bool fast = false;
  bool full = false;
  std::optional<double> depletion;
  std::string scan_range;
  std::string grid;
};

double parse_number(const std::string& s, const std::string& flag) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ConfigError(flag, "not a number: " + s);
  return v;
}

json read_document(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
}

// Command-line overrides are merged into the document so they go through
// the same validation as file values.
void apply_overrides(json& doc, const Overrides& o) {
  if (!doc.is_object()) throw ConfigError("", "expected an object");
  if (!o.out.empty()) doc["output"]["dir"] = o.out;
  if (o.depletion) doc["experiment"]["depletion"] = *o.depletion;
  if (!o.scan_range.empty()) {
    const auto colon = o.scan_range.find(':');
    if (colon == std::string::npos) throw ConfigError("--scan-range", "expected lo:hi");
    doc["experiment"]["range"] = {parse_number(o.scan_range.substr(0, colon), "--scan-range"),
                                  parse_number(o.scan_range.substr(colon + 1), "--scan-range")};
  }
  if (!o.grid.empty()) {
    std::stringstream ss(o.grid);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("--grid", "expected key=value");
      const auto key = item.substr(0, eq);
      const double v = parse_number(item.substr(eq + 1), "--grid");
      if (key == "nx") {
        if (!(v >= 2.0) || v != static_cast<double>(static_cast<long long>(v))) {
          throw ConfigError("--grid", "nx must be an integer >= 2");
        }
        doc["solver"]["nx"] = static_cast<long long>(v);
      } else if (key == "xmax" || key == "cfl") {
        doc["solver"][key] = v;
      } else {
        throw ConfigError("--grid", "unknown key " + key);
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stem/progenitor homeostasis model: simulations, equilibria and checks"};
  app.require_subcommand(1);
  Overrides o;
  for (const auto& name : homeostat::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_flag("--fast", o.fast, "reduced-scale profile (nx <= 400)");
    sub->add_flag("--full", o.full, "full-scale profile (default)");
    sub->add_option("--depletion", o.depletion, "stem depletion fraction in (0, 1]");
    sub->add_option("--scan-range", o.scan_range, "scan interval lo:hi");
    sub->add_option("--grid", o.grid, "grid overrides, e.g. nx=400,xmax=20");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : homeostat::kExitUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (o.fast && o.full) {
    std::cerr << "error: --fast and --full are exclusive\n";
    return homeostat::kExitUsage;
  }

  homeostat::RunConfig cfg;
  try {
    auto doc = read_document(o.config);
    apply_overrides(doc, o);
    cfg = homeostat::parse_config(doc);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return homeostat::kExitUsage;
  }

  homeostat::CommandOptions opt;
  if (o.fast) opt.verify.nx_cap = homeostat::kFastNxCap;
  try {
    return homeostat::dispatch(command, cfg, std::cout, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return homeostat::kExitUsage;
  } catch (const homeostat::UnsupportedConfiguration& e) {
    std::cerr << "unsupported configuration: " << e.what() << '\n';
    return homeostat::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return homeostat::kExitCheckFailed;
  }
}
