#pragma once

// Chooses the operating point handed to the scheduler: the delivery model
// (mu, sigma2) minimizing total weighted AoI over the delta-tightened inner
// region of the second-order capacity region.

#include <cstdint>
#include <span>
#include <vector>

#include "sosched/aoi.hpp"
#include "sosched/capacity.hpp"

namespace sosched {

struct SolverConfig {
    /// Margin subtracted from every proper-subset bound.
    double delta = 1e-3;
    int max_iters = 5000;
    /// Initial step length as a fraction of m_full.
    double step_size = 0.05;
    /// Stop once an accepted step improves the objective by less than this.
    double tolerance = 1e-12;
    /// Grid step used by brute_force_oracle.
    double grid_resolution = 0.01;
    /// Number of starting points: the proportional point plus random ones.
    int starts = 5;
    std::uint64_t seed = 0;
    /// Lower bound on every rate; the AoI objective diverges at mu = 0.
    double mu_floor = 1e-4;
    int max_repair_iters = 500;
};

struct SolveResult {
    OperatingPoint point;
    /// Total weighted theoretical AoI at `point`.
    double objective = 0.0;
    int iterations = 0;
    /// Proper subsets whose slack m_S - sum_S mu is at most 10 delta.
    std::vector<SubsetMask> binding_subsets;
    bool converged = true;
    /// Objective after each accepted step of the winning start (reduced form,
    /// equal to `objective` at the end).
    std::vector<double> objective_history;
};

/// sum_i alpha_i aoi_approx(mu_i, sigma2_i, lambda_i).
double theoretical_total_aoi(const OperatingPoint& point, std::span<const UpdateModel> models);

/// Spreads a total standard-deviation budget V across clients to minimize
/// sum_i (alpha_i/2) sigma2_i / mu_i^2 subject to sum_i sigma_i = V:
/// sigma_i = V (mu_i^2/alpha_i) / sum_j (mu_j^2/alpha_j). Returns sigma2_i.
std::vector<double> sigma_allocation(std::span<const double> mu, double total_sd,
                                     std::span<const double> weights);

/// Total weighted AoI as a function of mu alone, with sigma2 given by
/// sigma_allocation(mu, total_sd, weights).
double reduced_total_aoi(std::span<const double> mu, double total_sd,
                         std::span<const UpdateModel> models);

/// Analytic gradient of reduced_total_aoi with respect to mu.
std::vector<double> reduced_total_aoi_gradient(std::span<const double> mu, double total_sd,
                                               std::span<const UpdateModel> models);

/// Multi-start projected descent on mu over
///   { sum mu = m_full, sum_S mu <= m_S - delta for proper S, mu >= mu_floor }.
/// Throws InfeasibleRegion when the proportional point mu_i ~ m_{i} is not
/// inner-feasible. A run that exhausts max_iters returns its best iterate
/// with converged = false.
SolveResult solve_operating_point(const SecondOrderStats& stats,
                                  std::span<const UpdateModel> models,
                                  const SolverConfig& config = {});

/// Exhaustive grid over the equality slice for N <= 3 (rates on multiples of
/// grid_resolution), sigma2 from sigma_allocation; returns the best
/// inner-feasible grid point. `iterations` counts evaluated grid points.
SolveResult brute_force_oracle(const SecondOrderStats& stats,
                               std::span<const UpdateModel> models, double delta,
                               double grid_resolution);

/// Proportional starting point mu_i = m_full * m_{i} / sum_j m_{j}.
std::vector<double> proportional_point(const SecondOrderStats& stats);

} // namespace sosched
