#pragma once

// Batch execution of a parsed configuration: scenario fan-out, exit codes and
// artifact writing.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qmaxent/cli/config.hpp"

namespace qmaxent::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_other = 1,
  exit_parse = 2,
  exit_infeasible = 3,
  exit_non_convergence = 4,
  exit_precondition = 5,
  exit_io = 6,
  exit_tolerance = 7,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::infeasible:
    case ErrorKind::boundary: return exit_infeasible;
    case ErrorKind::non_convergence: return exit_non_convergence;
    case ErrorKind::precondition: return exit_precondition;
    default: return exit_other;
  }
}

inline constexpr const char* output_dir_env = "QMAXENT_OUTPUT_DIR";

struct RunOptions {
  std::optional<std::string> output_dir;
  std::optional<double> constraint_tol;
  int parallel = 1;
  bool write_files = true;
};

struct RunResult {
  int exit_code = exit_ok;
  std::vector<ScenarioReport> reports;
  std::vector<std::string> messages;
  std::filesystem::path csv_path;
  std::filesystem::path report_path;
};

// Flag, then environment, then config, then the working directory.
inline std::filesystem::path resolve_output_dir(const RunConfig& cfg, const RunOptions& opts) {
  if (opts.output_dir) return *opts.output_dir;
  if (const char* env = std::getenv(output_dir_env); env != nullptr && *env != '\0') return env;
  if (cfg.output.dir) return *cfg.output.dir;
  return ".";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline RunResult run(const RunConfig& cfg, const RunOptions& opts = {}) {
  RunResult result;
  ScenarioOptions base;
  base.solver = cfg.solver;
  if (opts.constraint_tol) base.solver.constraint_tol = *opts.constraint_tol;
  base.tolerance = cfg.tolerance;
  base.seed = cfg.seed;

  const std::size_t n = cfg.scenarios.size();
  std::vector<std::optional<ScenarioReport>> reports(n);
  std::vector<int> codes(n, exit_ok);
  std::vector<std::string> errors(n);

  auto work = [&](std::size_t i) {
    const ScenarioEntry& e = cfg.scenarios[i];
    try {
      reports[i] = e.runner(base);
    } catch (const Error& err) {
      codes[i] = exit_code_for(err.kind());
      errors[i] = e.id + " (scenario " + std::to_string(i) + "): " + std::string(to_string(err.kind())) + ": " + err.what();
    } catch (const std::exception& err) {
      codes[i] = exit_other;
      errors[i] = e.id + " (scenario " + std::to_string(i) + "): " + err.what();
    }
  };

  const int workers = std::max(1, std::min<int>(opts.parallel, static_cast<int>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
  }

  // first failure in scenario order decides the exit code
  for (std::size_t i = 0; i < n; ++i) {
    if (codes[i] != exit_ok) {
      result.messages.push_back(errors[i]);
      if (result.exit_code == exit_ok) result.exit_code = codes[i];
      continue;
    }
    const ScenarioReport& r = *reports[i];
    if (!r.converged) {
      result.messages.push_back(r.scenario_id + " (scenario " + std::to_string(i) + "): solver did not converge");
      if (result.exit_code == exit_ok) result.exit_code = exit_non_convergence;
    } else if (!r.within_tolerance()) {
      std::string worst;
      double delta = -1.0;
      for (const auto& [name, d] : r.oracle_deltas())
        if (d > delta) {
          delta = d;
          worst = name;
        }
      result.messages.push_back(r.scenario_id + " (scenario " + std::to_string(i) + "): oracle delta of '" + worst +
                                "' is " + format_real(delta) + ", above tolerance " + format_real(r.tolerance));
      if (result.exit_code == exit_ok) result.exit_code = exit_tolerance;
    }
    result.reports.push_back(r);
  }
  if (result.exit_code != exit_ok && result.exit_code != exit_non_convergence && result.exit_code != exit_tolerance) {
    return result;
  }
  if (!opts.write_files) return result;

  const std::filesystem::path dir = resolve_output_dir(cfg, opts);
  try {
    std::filesystem::create_directories(dir);
    std::ostringstream csv, report;
    write_csv(csv, result.reports);
    write_reports(report, result.reports);
    result.csv_path = dir / cfg.output.csv;
    result.report_path = dir / cfg.output.report;
    write_text(result.csv_path, csv.str());
    write_text(result.report_path, report.str());
  } catch (const std::exception& e) {
    result.messages.push_back(std::string("output: ") + e.what());
    result.exit_code = exit_io;
  }
  return result;
}

inline void list_scenarios(std::ostream& out) {
  std::size_t w_id = 2, w_params = 10;
  for (const ScenarioInfo& s : scenario_registry()) {
    w_id = std::max(w_id, s.id.size());
    w_params = std::max(w_params, s.parameters.size());
  }
  out << std::left << std::setw(static_cast<int>(w_id)) << "id" << "  " << std::setw(static_cast<int>(w_params))
      << "parameters" << "  " << "reproduces" << '\n';
  for (const ScenarioInfo& s : scenario_registry()) {
    out << std::setw(static_cast<int>(w_id)) << std::string(s.id) << "  " << std::setw(static_cast<int>(w_params))
        << std::string(s.parameters) << "  " << s.anchor << '\n';
  }
}

}  // namespace qmaxent::cli
