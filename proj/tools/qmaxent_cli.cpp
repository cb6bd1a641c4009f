// qmaxent_cli: run entropy-production scenarios from a JSON configuration.
//
//   qmaxent_cli run <config> [--output DIR] [--seed N] [--tol X] [--parallel N]
//   qmaxent_cli check <config> [--seed N]
//   qmaxent_cli list

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qmaxent/cli/config.hpp"
#include "qmaxent/cli/run.hpp"

namespace {

using namespace qmaxent::cli;

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Returns the exit code on failure.
std::optional<RunConfig> load(const std::string& path, const ParseOptions& opts, int& code) {
  const std::optional<std::string> text = slurp(path);
  if (!text) {
    std::cerr << "error: cannot read config '" << path << "'\n";
    code = exit_io;
    return std::nullopt;
  }
  try {
    return parse_config(*text, opts);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << path << ": " << e.what() << '\n';
    code = exit_parse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << path << ": " << e.what() << '\n';
    code = exit_parse;
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-entropy inference and entropy production scenarios"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  int parallel = 1;

  CLI::App* run_cmd = app.add_subcommand("run", "Run every scenario of a configuration and write CSV and report");
  run_cmd->add_option("config", config_path, "Configuration file (JSON)")->required();
  run_cmd->add_option("--output", output_dir, "Output directory (overrides $QMAXENT_OUTPUT_DIR and the config)");
  run_cmd->add_option("--seed", seed, "Seed for random entries (overrides the config)");
  run_cmd->add_option("--tol", tol, "Solver constraint tolerance")->check(CLI::PositiveNumber);
  run_cmd->add_option("--parallel", parallel, "Worker threads for scenario fan-out")->check(CLI::Range(1, 256));

  CLI::App* check_cmd = app.add_subcommand("check", "Validate a configuration without running it");
  check_cmd->add_option("config", config_path, "Configuration file (JSON)")->required();
  check_cmd->add_option("--seed", seed, "Seed for random entries (overrides the config)");

  CLI::App* list_cmd = app.add_subcommand("list", "List available scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_parse;
  }

  if (list_cmd->parsed()) {
    list_scenarios(std::cout);
    return exit_ok;
  }

  int code = exit_ok;
  const std::optional<RunConfig> cfg = load(config_path, ParseOptions{seed}, code);
  if (!cfg) return code;

  if (check_cmd->parsed()) {
    std::cout << "ok: " << cfg->scenarios.size() << " scenario(s)\n";
    return exit_ok;
  }

  RunOptions opts;
  opts.output_dir = output_dir;
  opts.constraint_tol = tol;
  opts.parallel = parallel;
  const RunResult result = run(*cfg, opts);
  for (const std::string& m : result.messages) std::cerr << "error: " << m << '\n';
  if (!result.csv_path.empty()) {
    std::cout << "wrote " << result.csv_path.string() << '\n' << "wrote " << result.report_path.string() << '\n';
  }
  return result.exit_code;
}
