#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sosched/channel.hpp"

namespace sosched {

/// Target delivery model: per-client long-run delivery rate mu_i and temporal
/// variance sigma2_i of the delivery process.
struct OperatingPoint {
    std::vector<double> mu;
    std::vector<double> sigma2;

    std::size_t size() const noexcept { return mu.size(); }
};

enum class Constraint {
    kSubsetMean,       // sum_{i in S} mu_i <= m_S (- delta)
    kTotalMean,        // sum_i mu_i == m_full
    kVarianceBudget,   // sum_i sqrt(sigma2_i) >= sqrt(v_full^2)
    kNonNegativeMean,  // mu_i >= 0
    kPositiveVariance, // sigma2_i > 0
};

std::string_view to_string(Constraint c) noexcept;

/// One failed constraint. `subset` is the subset mask for subset constraints,
/// the full mask for the total-mean and variance-budget rows, and the single
/// client's bit for per-client rows. `slack` is bound minus value (signed so
/// that it is negative when violated).
struct Violation {
    Constraint constraint;
    SubsetMask subset;
    double slack;
};

struct FeasibilityReport {
    bool feasible = true;
    std::vector<Violation> violations;
};

/// Tolerance on the total-mean equality for analytic (non-empirical) points.
inline constexpr double kEqualityTol = 1e-9;

/// Necessary conditions for membership in the second-order capacity region,
/// each relaxed by `tol`. The total-mean equality and the variance budget use
/// max(tol, kEqualityTol). All violations are reported.
FeasibilityReport check_outer(const SecondOrderStats& stats, const OperatingPoint& point,
                              double tol);

/// Sufficient conditions, with the strict proper-subset inequalities tightened
/// to sum_S mu <= m_S - delta. The equality and variance budget are checked to
/// kEqualityTol.
FeasibilityReport check_inner(const SecondOrderStats& stats, const OperatingPoint& point,
                              double delta);

struct SubsetSlack {
    SubsetMask subset = 0;
    double slack = 0.0;
};

inline constexpr std::size_t kMaxEnumeratedClients = 25;

/// Non-empty proper subset minimizing m_S - sum_{i in S} mu_i, found by a
/// Gray-code sweep with O(1) incremental work per subset. Slacks within
/// 1e-12 of each other are ties and resolve to the lowest mask. With a single
/// client there is no proper subset; the result is {0, +inf}.
SubsetSlack most_violated_subset(const SecondOrderStats& stats, std::span<const double> mu);

/// Every non-empty proper subset with m_S - sum_{i in S} mu_i <= threshold,
/// in ascending mask order.
std::vector<SubsetSlack> subsets_with_slack_at_most(const SecondOrderStats& stats,
                                                    std::span<const double> mu,
                                                    double threshold);

} // namespace sosched
