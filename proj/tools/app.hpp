#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "meanfield/io.hpp"

namespace meanfield::app {

inline constexpr const char* kCodeVersion = "meanfield 0.1.0";

std::vector<std::string> preset_names();
/// Full experiment configuration for a named preset (ConfigError if unknown).
Json preset(const std::string& name);

// Pipelines. Each takes its config section, writes its artifacts into `out`
// (skipped when `out` is empty) and returns a JSON summary.

/// Section: sim (SimConfig), replicas, initial_law. Writes dataset/,
/// energy.csv and summary.json.
Json run_simulate(const Json& section, const std::filesystem::path& out);

/// Section: kind ("kinetic" | "first_order"), grid sizes, initial data,
/// sigma, t_end, dt, kernel. Writes solution.mft, density.mft, rho.csv and
/// report.json.
Json run_solve_pde(const Json& section, const std::filesystem::path& out);

/// Section: dataset (directory, default <out>/dataset), time, k, grid, q,
/// Lambda, optional pde (density.mft to compare against). Writes
/// marginal.mft and analysis.json.
Json run_analyze(const Json& section, const std::filesystem::path& out);

/// Section: HierarchyParams plus an optional recursion trace. Writes
/// bounds.json and bounds.csv.
Json run_bounds(const Json& section, const std::filesystem::path& out);

/// Section: sim, initial_law, replicas, N_values, time, grid, optional
/// grid_k2, reference ("pde" | "self"), pde, q, Lambda, trace_points,
/// verify_recursion. Writes convergence.csv and compare.json.
Json run_compare(const Json& section, const std::filesystem::path& out);

/// SVG plots for the recognized data files in `dir`; MissingData if none.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& dir);

/// manifest.json listing every other file under `dir` with its SHA-256.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const Json& config);
/// {"verified": n, "mismatches": [...]}; MissingData without a manifest.
Json verify_manifest(const std::filesystem::path& dir);

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 selftest mismatch, 2 configuration error, 3 numerical error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace meanfield::app
