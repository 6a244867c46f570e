#pragma once

// Experiment drivers behind the sosched subcommands. Each run_* returns the
// computed tables; each write_* serializes them into an output directory.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sosched/cli/config.hpp"
#include "sosched/sim.hpp"
#include "sosched/solver.hpp"

namespace sosched::cli {

/// Numbers in every CSV use this format: 9 significant digits.
std::string format_number(double x);

struct ValidateRow {
    double p;
    double q;
    double lambda;
    double theoretical_aoi;
    double empirical_aoi;
    double abs_diff;
    double stderr_aoi;
};

/// Single-client grid: every (q, lambda, p) combination, scheduled whenever ON.
std::vector<ValidateRow> run_validate(const ExperimentConfig& config);
void write_validate(const std::vector<ValidateRow>& rows, const std::filesystem::path& dir);

struct StatsRow {
    SubsetMask subset;
    double mean;
    double variance;
    /// False if some one-client superset has a smaller mean.
    bool monotone;
    std::optional<EmpiricalSubsetStats> empirical;
};

/// Closed-form table over every non-empty subset (N <= 20), plus Monte Carlo
/// columns when `simulate` is set.
std::vector<StatsRow> run_stats(const ExperimentConfig& config, bool simulate);
void write_stats(const std::vector<StatsRow>& rows, const std::filesystem::path& dir);

/// Solves and re-checks the point against the inner region before returning.
SolveResult run_solve(const ExperimentConfig& config);
void write_solve(const SolveResult& result, const std::filesystem::path& dir);

struct SimulateResult {
    std::vector<ClientConfig> clients;
    OperatingPoint point;
    std::vector<double> theoretical_aoi;
    PolicyKind policy;
    BatchMetrics batch;
};

/// One policy on the configured instance. The point comes from the config
/// when given, otherwise from the solver.
SimulateResult run_simulate(const ExperimentConfig& config);
void write_simulate(const SimulateResult& result, const std::filesystem::path& dir);

struct CompareResult {
    std::vector<ClientConfig> clients;
    SolveResult solution;
    std::vector<std::pair<PolicyKind, BatchMetrics>> batches;
};

/// Every listed policy on the same instance and operating point, with common
/// random numbers unless independent traces are requested.
CompareResult run_compare(const ExperimentConfig& config);
void write_compare(const CompareResult& result, const std::filesystem::path& dir);

/// Point for simulate/compare: the configured one or a fresh solve.
SolveResult operating_point_for(const ExperimentConfig& config,
                                const std::vector<ClientConfig>& clients);

SimConfig sim_config_for(const ExperimentConfig& config, std::vector<ClientConfig> clients,
                         PolicyKind policy, std::optional<OperatingPoint> point);

} // namespace sosched::cli
