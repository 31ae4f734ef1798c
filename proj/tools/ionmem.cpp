// Command-line entry point: ionmem run|validate|version.
//
// Exit status: 0 success, 1 invalid configuration, 2 runtime failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ionmem/config.hpp"
#include "ionmem/runner.hpp"

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

bool read_text(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  text = ss.str();
  return true;
}

int load(const std::string& path, ionmem::RunConfig& cfg) {
  std::string text;
  if (!read_text(path, text)) {
    std::cerr << "error: cannot read " << path << "\n";
    return kExitInvalid;
  }
  try {
    cfg = ionmem::parse_config(text);
  } catch (const ionmem::ConfigError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitInvalid;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trapped-ion quantum memory simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config file");
  run_cmd->add_option("config", config_path, "Config file")->required();
  run_cmd->add_option("-o,--output", output, "Override the output CSV path");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config file without running it");
  validate_cmd->add_option("config", validate_path, "Config file")->required();

  auto* version_cmd = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  if (version_cmd->parsed()) {
    std::cout << "ionmem " << ionmem::artifact_version() << "\n";
    return 0;
  }

  if (validate_cmd->parsed()) {
    ionmem::RunConfig cfg;
    if (const int rc = load(validate_path, cfg); rc != 0) return rc;
    std::cout << validate_path << ": ok (" << ionmem::to_string(cfg.experiment) << ")\n";
    return 0;
  }

  ionmem::RunConfig cfg;
  if (const int rc = load(config_path, cfg); rc != 0) return rc;
  try {
    ionmem::RunOptions options;
    options.output_override = output;
    const auto report = ionmem::run(cfg, options);
    std::cout << "wrote " << report.csv_path.string() << "\n" << report.summary << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
