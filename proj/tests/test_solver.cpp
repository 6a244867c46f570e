#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sosched/capacity.hpp"
#include "sosched/error.hpp"
#include "sosched/solver.hpp"

using namespace sosched;

namespace {

double total_sd(const SecondOrderStats& s) { return std::sqrt(s.full().variance); }

std::vector<UpdateModel> unit_models(std::size_t n, double lambda = 1.0) {
    return std::vector<UpdateModel>(n, UpdateModel(lambda, 1.0));
}

void expect_valid(const SecondOrderStats& stats, const SolveResult& r, double delta) {
    EXPECT_TRUE(check_inner(stats, r.point, delta).feasible);
    EXPECT_TRUE(check_inner(stats, r.point, delta * (1.0 - 1e-6)).feasible);
    EXPECT_TRUE(check_outer(stats, r.point, 0.0).feasible);
    double sd = 0.0;
    for (double s2 : r.point.sigma2) {
        sd += std::sqrt(s2);
    }
    EXPECT_NEAR(sd, total_sd(stats), 1e-9);
}

} // namespace

TEST(SigmaAllocation, SpendsBudgetAndIsStationary) {
    const std::vector<double> mu{0.2, 0.3, 0.4};
    const std::vector<double> alpha{1.0, 2.0, 3.0};
    const auto s2 = sigma_allocation(mu, 0.5, alpha);
    double sd = 0.0;
    for (double x : s2) {
        sd += std::sqrt(x);
    }
    EXPECT_NEAR(sd, 0.5, 1e-15);
    // Cost sum alpha sigma^2 / (2 mu^2) must not drop along the budget line.
    auto cost = [&](const std::vector<double>& sd_i) {
        double c = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            c += alpha[i] * sd_i[i] * sd_i[i] / (2.0 * mu[i] * mu[i]);
        }
        return c;
    };
    std::vector<double> base;
    for (double x : s2) {
        base.push_back(std::sqrt(x));
    }
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) {
                continue;
            }
            auto moved = base;
            moved[i] += 1e-3;
            moved[j] -= 1e-3;
            EXPECT_GT(cost(moved), cost(base));
        }
    }
    EXPECT_THROW(sigma_allocation(mu, 0.0, alpha), DomainError);
    const std::vector<double> bad{0.0, 0.3, 0.4};
    EXPECT_THROW(sigma_allocation(bad, 0.5, alpha), DomainError);
}

TEST(ReducedObjective, GradientMatchesFiniteDifferences) {
    std::mt19937_64 g(41);
    std::uniform_real_distribution<double> u(0.05, 0.5);
    std::uniform_real_distribution<double> w(1.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 4;
        std::vector<double> mu;
        std::vector<UpdateModel> models;
        for (std::size_t i = 0; i < n; ++i) {
            mu.push_back(u(g));
            models.emplace_back(u(g), w(g));
        }
        const double v = 0.3;
        const auto grad = reduced_total_aoi_gradient(mu, v, models);
        for (std::size_t i = 0; i < n; ++i) {
            const double h = 1e-6;
            auto hi = mu;
            auto lo = mu;
            hi[i] += h;
            lo[i] -= h;
            const double fd =
                (reduced_total_aoi(hi, v, models) - reduced_total_aoi(lo, v, models)) / (2.0 * h);
            EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(TheoreticalTotalAoi, AdditiveAndWeighted) {
    const OperatingPoint p{{0.8, 0.8}, {0.16, 0.16}};
    const std::vector<UpdateModel> unit{UpdateModel(1.0), UpdateModel(1.0)};
    EXPECT_NEAR(theoretical_total_aoi(p, unit), 2.0 * aoi_approx(0.8, 0.16, 1.0), 1e-15);
    const std::vector<UpdateModel> weighted{UpdateModel(1.0, 2.0), UpdateModel(1.0, 3.0)};
    EXPECT_NEAR(theoretical_total_aoi(p, weighted), 5.0 * 1.25, 1e-14);
    EXPECT_THROW(theoretical_total_aoi(p, std::vector<UpdateModel>{UpdateModel(1.0)}),
                 DimensionMismatch);
}

TEST(Solver, SingleClientTakesChannelStatistics) {
    const SecondOrderStats stats({{0.3, 0.6}});
    const auto r = solve_operating_point(stats, unit_models(1));
    EXPECT_NEAR(r.point.mu[0], stats.full().mean, 1e-12);
    EXPECT_NEAR(r.point.sigma2[0], stats.full().variance, 1e-12);
}

TEST(Solver, ExchangeableClientsGetEqualShares) {
    const SecondOrderStats stats({{0.5, 0.5}, {0.5, 0.5}});
    const auto r = solve_operating_point(stats, unit_models(2));
    EXPECT_NEAR(r.point.mu[0], 0.375, 1e-6);
    EXPECT_NEAR(r.point.mu[1], 0.375, 1e-6);
    EXPECT_NEAR(r.point.sigma2[0], r.point.sigma2[1], 1e-6);
    expect_valid(stats, r, 1e-3);
}

TEST(Solver, MatchesGridOracleOnIidPair) {
    const SecondOrderStats stats({{0.2, 0.8}, {0.6, 0.4}});
    const auto models = unit_models(2);
    const auto r = solve_operating_point(stats, models);
    const auto oracle = brute_force_oracle(stats, models, 1e-3, 0.001);
    EXPECT_LE(r.objective, oracle.objective + 1e-9);
    EXPECT_NEAR(r.point.mu[0], oracle.point.mu[0], 0.002);
    expect_valid(stats, r, 1e-3);
}

TEST(Solver, NeverWorseThanGridOnRandomInstances) {
    std::mt19937_64 g(42);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::uniform_real_distribution<double> w(1.0, 5.0);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 2 + trial % 2;
        std::vector<ChannelParams> params;
        std::vector<UpdateModel> models;
        for (std::size_t i = 0; i < n; ++i) {
            params.emplace_back(u(g), u(g));
            models.emplace_back(u(g) / static_cast<double>(n), w(g));
        }
        const SecondOrderStats stats(params);
        const auto r = solve_operating_point(stats, models);
        const auto oracle = brute_force_oracle(stats, models, 1e-3, 0.01);
        EXPECT_LE(r.objective, oracle.objective * (1.0 + 1e-6)) << "trial " << trial;
        expect_valid(stats, r, 1e-3);
    }
}

TEST(Solver, HistoryIsNonIncreasingAndEndsAtObjective) {
    const SecondOrderStats stats({{0.2, 0.3}, {0.7, 0.4}, {0.1, 0.9}, {0.5, 0.2}});
    const std::vector<UpdateModel> models{UpdateModel(0.2), UpdateModel(0.1), UpdateModel(0.15),
                                          UpdateModel(0.05)};
    const auto r = solve_operating_point(stats, models);
    ASSERT_FALSE(r.objective_history.empty());
    for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
        EXPECT_LE(r.objective_history[k], r.objective_history[k - 1]);
    }
    EXPECT_NEAR(r.objective_history.back(), r.objective, 1e-9 * r.objective);
    EXPECT_TRUE(r.converged);
}

TEST(Solver, BindingSubsetsWithinTenDelta) {
    const SecondOrderStats stats({{0.17, 0.17}, {0.07, 0.37}, {0.47, 0.12}, {0.62, 0.13},
                                  {0.76, 0.25}});
    const auto models = unit_models(5, 0.1);
    const auto r = solve_operating_point(stats, models);
    for (SubsetMask s : r.binding_subsets) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            if ((s >> i) & 1U) {
                sum += r.point.mu[i];
            }
        }
        EXPECT_LE(stats.mean(s) - sum, 1e-2 + 1e-12);
        EXPECT_NE(s, stats.full_mask());
    }
    expect_valid(stats, r, 1e-3);
}

TEST(Solver, Deterministic) {
    const SecondOrderStats stats({{0.3, 0.2}, {0.6, 0.5}, {0.2, 0.7}});
    const auto models = unit_models(3, 0.2);
    const auto a = solve_operating_point(stats, models);
    const auto b = solve_operating_point(stats, models);
    EXPECT_EQ(a.point.mu, b.point.mu);
    EXPECT_EQ(a.point.sigma2, b.point.sigma2);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Solver, InfeasibleWhenMarginTooLarge) {
    const SecondOrderStats stats({{0.5, 0.5}, {0.5, 0.5}});
    SolverConfig config;
    config.delta = 0.5;
    EXPECT_THROW(solve_operating_point(stats, unit_models(2), config), InfeasibleRegion);
    config.delta = 0.0;
    EXPECT_THROW(solve_operating_point(stats, unit_models(2), config), DomainError);
}

TEST(BruteForceOracle, GuardsAndCounts) {
    const SecondOrderStats four({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    EXPECT_THROW(brute_force_oracle(four, unit_models(4), 1e-3, 0.01), TooManyClients);
    const SecondOrderStats two({{0.5, 0.5}, {0.5, 0.5}});
    const auto r = brute_force_oracle(two, unit_models(2), 1e-3, 0.01);
    EXPECT_GE(r.iterations, 74);
    EXPECT_LE(r.iterations, 75);
    EXPECT_NEAR(r.point.mu[0], 0.375, 0.0051);
}
