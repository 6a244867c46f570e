#include "sosched/capacity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "sosched/error.hpp"

namespace sosched {

namespace {

constexpr double kTieTol = 1e-12;
constexpr std::uint64_t kRecomputeEvery = 4096;

void check_dimensions(const SecondOrderStats& stats, const OperatingPoint& point) {
    if (point.mu.size() != stats.n_clients() || point.sigma2.size() != stats.n_clients()) {
        throw DimensionMismatch(fmt::format(
            "operating point has {} rates and {} variances but the channel model has {} clients",
            point.mu.size(), point.sigma2.size(), stats.n_clients()));
    }
}

/// Visits every non-empty subset in Gray-code order, passing (mask, m_S,
/// sum_{i in S} mu_i). Each step toggles one client, so both running
/// quantities update in O(1); the product is refreshed from scratch
/// periodically to stop rounding drift.
template <typename Visit>
void for_each_subset(std::span<const double> off_probs, std::span<const double> mu,
                     Visit&& visit) {
    const std::size_t n = off_probs.size();
    const std::uint64_t count = std::uint64_t{1} << n;
    double all_off = 1.0;
    double rate = 0.0;
    SubsetMask mask = 0;
    for (std::uint64_t k = 1; k < count; ++k) {
        const auto flip = static_cast<std::size_t>(std::countr_zero(k));
        const SubsetMask bit = SubsetMask{1} << flip;
        mask ^= bit;
        if (mask & bit) {
            all_off *= off_probs[flip];
            rate += mu[flip];
        } else {
            all_off /= off_probs[flip];
            rate -= mu[flip];
        }
        if (k % kRecomputeEvery == 0) {
            all_off = 1.0;
            rate = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (SubsetMask{1} << i)) {
                    all_off *= off_probs[i];
                    rate += mu[i];
                }
            }
        }
        visit(mask, 1.0 - all_off, rate);
    }
}

void check_enumerable(const SecondOrderStats& stats) {
    if (stats.n_clients() > kMaxEnumeratedClients) {
        throw TooManyClients(fmt::format("subset enumeration is limited to {} clients, got {}",
                                         kMaxEnumeratedClients, stats.n_clients()));
    }
}

double sum_sqrt(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += std::sqrt(std::max(x, 0.0));
    }
    return s;
}

double sum(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s;
}

void finalize(FeasibilityReport& report) { report.feasible = report.violations.empty(); }

} // namespace

std::string_view to_string(Constraint c) noexcept {
    switch (c) {
    case Constraint::kSubsetMean:
        return "subset_mean";
    case Constraint::kTotalMean:
        return "total_mean";
    case Constraint::kVarianceBudget:
        return "variance_budget";
    case Constraint::kNonNegativeMean:
        return "nonnegative_mean";
    case Constraint::kPositiveVariance:
        return "positive_variance";
    }
    return "unknown";
}

FeasibilityReport check_outer(const SecondOrderStats& stats, const OperatingPoint& point,
                              double tol) {
    check_dimensions(stats, point);
    check_enumerable(stats);
    if (!(tol >= 0.0)) {
        throw DomainError("check_outer: tol must be nonnegative");
    }
    FeasibilityReport report;
    const SubsetMask full = stats.full_mask();

    // Equality and budget never get less room than check_inner gives them; the
    // full set is the equality's upper half.
    const double eq_tol = std::max(tol, kEqualityTol);
    for_each_subset(stats.off_probs(), point.mu, [&](SubsetMask s, double m_s, double rate) {
        const double slack = m_s + (s == full ? eq_tol : tol) - rate;
        if (slack < 0.0) {
            report.violations.push_back({Constraint::kSubsetMean, s, slack});
        }
    });

    const double total_gap = std::abs(sum(point.mu) - stats.full().mean);
    if (total_gap > eq_tol) {
        report.violations.push_back({Constraint::kTotalMean, full, eq_tol - total_gap});
    }

    const double budget = sum_sqrt(point.sigma2) - std::sqrt(stats.full().variance) + eq_tol;
    if (budget < 0.0) {
        report.violations.push_back({Constraint::kVarianceBudget, full, budget});
    }

    for (std::size_t i = 0; i < point.size(); ++i) {
        if (point.mu[i] + tol < 0.0) {
            report.violations.push_back(
                {Constraint::kNonNegativeMean, SubsetMask{1} << i, point.mu[i] + tol});
        }
    }
    finalize(report);
    return report;
}

FeasibilityReport check_inner(const SecondOrderStats& stats, const OperatingPoint& point,
                              double delta) {
    check_dimensions(stats, point);
    check_enumerable(stats);
    if (!(delta > 0.0)) {
        throw DomainError("check_inner: delta must be positive");
    }
    FeasibilityReport report;
    const SubsetMask full = stats.full_mask();

    for_each_subset(stats.off_probs(), point.mu, [&](SubsetMask s, double m_s, double rate) {
        if (s == full) {
            return;
        }
        const double slack = m_s - delta - rate;
        if (slack < 0.0) {
            report.violations.push_back({Constraint::kSubsetMean, s, slack});
        }
    });

    const double total_gap = std::abs(sum(point.mu) - stats.full().mean);
    if (total_gap > kEqualityTol) {
        report.violations.push_back({Constraint::kTotalMean, full, kEqualityTol - total_gap});
    }

    const double budget =
        sum_sqrt(point.sigma2) - std::sqrt(stats.full().variance) + kEqualityTol;
    if (budget < 0.0) {
        report.violations.push_back({Constraint::kVarianceBudget, full, budget});
    }

    for (std::size_t i = 0; i < point.size(); ++i) {
        if (point.mu[i] < 0.0) {
            report.violations.push_back(
                {Constraint::kNonNegativeMean, SubsetMask{1} << i, point.mu[i]});
        }
        if (!(point.sigma2[i] > 0.0)) {
            report.violations.push_back(
                {Constraint::kPositiveVariance, SubsetMask{1} << i, point.sigma2[i]});
        }
    }
    finalize(report);
    return report;
}

SubsetSlack most_violated_subset(const SecondOrderStats& stats, std::span<const double> mu) {
    check_enumerable(stats);
    if (mu.size() != stats.n_clients()) {
        throw DimensionMismatch(fmt::format("rate vector has {} entries, model has {} clients",
                                            mu.size(), stats.n_clients()));
    }
    SubsetSlack best{0, std::numeric_limits<double>::infinity()};
    const SubsetMask full = stats.full_mask();
    for_each_subset(stats.off_probs(), mu, [&](SubsetMask s, double m_s, double rate) {
        if (s == full) {
            return;
        }
        const double slack = m_s - rate;
        if (slack < best.slack - kTieTol ||
            (std::abs(slack - best.slack) <= kTieTol && s < best.subset)) {
            best = {s, slack};
        }
    });
    return best;
}

std::vector<SubsetSlack> subsets_with_slack_at_most(const SecondOrderStats& stats,
                                                    std::span<const double> mu,
                                                    double threshold) {
    check_enumerable(stats);
    if (mu.size() != stats.n_clients()) {
        throw DimensionMismatch(fmt::format("rate vector has {} entries, model has {} clients",
                                            mu.size(), stats.n_clients()));
    }
    std::vector<SubsetSlack> out;
    const SubsetMask full = stats.full_mask();
    for_each_subset(stats.off_probs(), mu, [&](SubsetMask s, double m_s, double rate) {
        if (s != full && m_s - rate <= threshold) {
            out.push_back({s, m_s - rate});
        }
    });
    std::sort(out.begin(), out.end(),
              [](const SubsetSlack& a, const SubsetSlack& b) { return a.subset < b.subset; });
    return out;
}

} // namespace sosched
