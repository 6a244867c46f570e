#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sosched/capacity.hpp"
#include "sosched/error.hpp"
#include "sosched/sim.hpp"
#include "sosched/solver.hpp"

using namespace sosched;

namespace {

SimConfig single(double p, double q, double lambda, std::uint64_t horizon, std::uint64_t runs) {
    SimConfig c;
    c.clients = {{ChannelParams(p, q), UpdateModel(lambda)}};
    c.horizon = horizon;
    c.runs = runs;
    c.policy = PolicyKind::kWhittle;
    c.threads = 1;
    return c;
}

SimConfig three_clients(PolicyKind policy) {
    SimConfig c;
    c.clients = {{ChannelParams(0.3, 0.2), UpdateModel(0.2)},
                 {ChannelParams(0.2, 0.5), UpdateModel(0.1)},
                 {ChannelParams(0.6, 0.3), UpdateModel(0.3)}};
    std::vector<ChannelParams> ch;
    std::vector<UpdateModel> up;
    for (const auto& cl : c.clients) {
        ch.push_back(cl.channel);
        up.push_back(cl.update);
    }
    c.point = solve_operating_point(SecondOrderStats(ch), up).point;
    c.policy = policy;
    c.threads = 1;
    return c;
}

double median_at(const std::vector<RunMetrics>& runs, std::size_t k) {
    std::vector<double> v;
    for (const auto& r : runs) {
        v.push_back(r.max_rel_deficit_at[k]);
    }
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

TEST(DefaultCheckpoints, SortedUniqueEndingAtHorizon) {
    for (std::uint64_t horizon : {1ULL, 7ULL, 1000ULL, 50000ULL}) {
        const auto cp = default_checkpoints(horizon);
        ASSERT_FALSE(cp.empty());
        EXPECT_EQ(cp.front(), 1U);
        EXPECT_EQ(cp.back(), horizon);
        EXPECT_LE(cp.size(), 101U);
        EXPECT_TRUE(std::is_sorted(cp.begin(), cp.end()));
        EXPECT_EQ(std::adjacent_find(cp.begin(), cp.end()), cp.end());
    }
}

TEST(SimConfig, ValidationErrors) {
    auto c = single(0.2, 0.8, 1.0, 100, 2);
    c.checkpoints = {0};
    EXPECT_THROW(validate(c), ConfigError);
    c.checkpoints = {50, 40};
    EXPECT_THROW(validate(c), ConfigError);
    c.checkpoints = {101};
    EXPECT_THROW(validate(c), ConfigError);
    c.checkpoints = {};
    c.warmup = 100;
    EXPECT_THROW(validate(c), ConfigError);
    c.warmup = 0;
    c.policy = PolicyKind::kVwd;
    EXPECT_THROW(validate(c), ConfigError);
    c.point = OperatingPoint{{0.4, 0.4}, {0.1, 0.1}};
    EXPECT_THROW(validate(c), ConfigError);
    c.horizon = 0;
    EXPECT_THROW(validate(c), ConfigError);
}

TEST(RunEpisode, SaturatedClientHasAgeOne) {
    auto c = single(1e-9, 1.0, 1.0, 5000, 2);
    const auto m = run_episode(c, 0);
    EXPECT_EQ(m.deliveries[0].back(), 5000U);
    EXPECT_DOUBLE_EQ(m.time_avg_aoi[0], 1.0);
}

TEST(RunEpisode, AlwaysOffNeverDelivers) {
    // Stationary ON probability 1e-9: the chain starts OFF and stays there.
    auto c = single(1.0, 1e-9, 1.0, 3000, 2);
    const auto m = run_episode(c, 0);
    EXPECT_EQ(m.total_deliveries, 0U);
    EXPECT_DOUBLE_EQ(m.time_avg_aoi[0], 3001.0 / 2.0);
}

TEST(RunEpisode, IidChannelReachesRenewalAge) {
    auto c = single(0.2, 0.8, 1.0, 20000, 100);
    const auto b = run_batch(c);
    EXPECT_NEAR(b.aoi_mean[0], 1.25, std::max(4.0 * b.aoi_stderr[0], 1e-3));
    EXPECT_NEAR(b.renewal_aoi[0], 1.25, 0.01);
}

TEST(RunEpisode, TraceInvariants) {
    for (auto policy : {PolicyKind::kVwd, PolicyKind::kWhittle, PolicyKind::kRandomized,
                        PolicyKind::kMaxWeight}) {
        auto c = three_clients(policy);
        c.horizon = 3000;
        c.checkpoints = {10, 100, 1000, 3000};
        EpisodeTrace tr;
        const auto m = run_episode(c, 3, &tr);
        ASSERT_EQ(tr.on_sets.size(), 3000U);
        const std::size_t n = 3;
        std::vector<std::uint64_t> delivered(n, 0);
        double mu_sum = 0.0;
        for (double x : c.point->mu) {
            mu_sum += x;
        }
        std::uint64_t total = 0;
        std::vector<double> prev_aoi(n, 0.0);
        for (std::size_t t = 0; t < tr.on_sets.size(); ++t) {
            const auto& d = tr.decisions[t];
            EXPECT_EQ(d.scheduled.has_value(), tr.on_sets[t] != 0);
            if (d.scheduled) {
                EXPECT_TRUE((tr.on_sets[t] >> *d.scheduled) & 1U);
                ++delivered[*d.scheduled];
                ++total;
            }
            double d_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                d_sum += tr.deficits[t][i];
                const bool served = d.scheduled && *d.scheduled == i;
                if (!served) {
                    EXPECT_EQ(tr.aoi[t][i], prev_aoi[i] + 1.0);
                } else {
                    EXPECT_LE(tr.aoi[t][i], prev_aoi[i] + 1.0);
                }
                prev_aoi[i] = tr.aoi[t][i];
            }
            EXPECT_NEAR(d_sum, static_cast<double>(t + 1) * mu_sum - static_cast<double>(total),
                        1e-9 * static_cast<double>(t + 1));
        }
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(m.deliveries[i].back(), delivered[i]);
            EXPECT_TRUE(std::is_sorted(m.deliveries[i].begin(), m.deliveries[i].end()));
            EXPECT_NEAR(m.time_avg_aoi[i],
                        trace_time_average_aoi(tr.delivery_slots[i], tr.generation_slots[i], 3000),
                        1e-9);
        }
        EXPECT_LE(m.total_deliveries, 3000U);
    }
}

TEST(RunEpisode, DecisionsReplayFromRecordedState) {
    auto c = three_clients(PolicyKind::kVwd);
    c.horizon = 2000;
    EpisodeTrace tr;
    run_episode(c, 1, &tr);
    std::vector<ChannelParams> ch;
    std::vector<UpdateModel> up;
    for (const auto& cl : c.clients) {
        ch.push_back(cl.channel);
        up.push_back(cl.update);
    }
    const Scheduler sched(PolicyKind::kVwd, ch, up, c.point);
    auto state = SchedulerState::initial(3);
    for (std::size_t t = 0; t < tr.on_sets.size(); ++t) {
        EXPECT_EQ(sched.select(state, tr.on_sets[t], 0.0), tr.decisions[t]);
        state.deficits = tr.deficits[t];
        state.aoi = tr.aoi[t];
    }
}

TEST(RunEpisode, CommonRandomNumbersAcrossPolicies) {
    auto a = three_clients(PolicyKind::kVwd);
    auto b = three_clients(PolicyKind::kMaxWeight);
    a.horizon = b.horizon = 500;
    EpisodeTrace ta;
    EpisodeTrace tb;
    run_episode(a, 2, &ta);
    run_episode(b, 2, &tb);
    EXPECT_EQ(ta.on_sets, tb.on_sets);
    EXPECT_EQ(ta.generation_slots, tb.generation_slots);
    b.trace_salt = 1;
    run_episode(b, 2, &tb);
    EXPECT_NE(ta.on_sets, tb.on_sets);
}

TEST(RelativeDeficit, SingleClientIsIdenticallyZero) {
    auto c = single(0.3, 0.4, 0.5, 2000, 2);
    c.policy = PolicyKind::kVwd;
    c.point = OperatingPoint{{0.4 / 0.7}, {0.5}};
    EpisodeTrace tr;
    const auto m = run_episode(c, 0, &tr);
    EXPECT_NEAR(relative_deficit_diagnostic(tr, *c.point), 0.0, 1e-9);
    EXPECT_NEAR(m.max_rel_deficit, 0.0, 1e-9);
}

TEST(RelativeDeficit, BoundedForSymmetricFeasiblePoint) {
    SimConfig c;
    c.clients = {{ChannelParams(0.5, 0.5), UpdateModel(0.5)},
                 {ChannelParams(0.5, 0.5), UpdateModel(0.5)}};
    const double v = std::sqrt(0.1875);
    c.point = OperatingPoint{{0.375, 0.375}, {v * v / 4.0, v * v / 4.0}};
    c.horizon = 50000;
    c.checkpoints = {10000, 50000};
    c.threads = 1;
    std::vector<RunMetrics> runs;
    for (std::uint64_t r = 0; r < 40; ++r) {
        runs.push_back(run_episode(c, r));
    }
    EXPECT_LE(median_at(runs, 1), 2.0 * median_at(runs, 0));
}

TEST(RelativeDeficit, GrowsForInfeasiblePoint) {
    SimConfig c;
    c.clients = {{ChannelParams(0.5, 0.5), UpdateModel(0.5)},
                 {ChannelParams(0.5, 0.5), UpdateModel(0.5)}};
    // Client 0 asks for more than its own channel can give.
    c.point = OperatingPoint{{0.6, 0.3}, {0.05, 0.05}};
    c.horizon = 50000;
    c.checkpoints = {10000, 50000};
    c.threads = 1;
    std::vector<RunMetrics> runs;
    for (std::uint64_t r = 0; r < 20; ++r) {
        runs.push_back(run_episode(c, r));
    }
    EXPECT_GE(median_at(runs, 1), 3.5 * median_at(runs, 0));
}

TEST(RunBatch, Guards) {
    auto c = single(0.2, 0.8, 1.0, 100, 1);
    EXPECT_THROW(run_batch(c), InsufficientRuns);
}

TEST(RunBatch, DeterministicAcrossThreadCounts) {
    auto c = three_clients(PolicyKind::kVwd);
    c.horizon = 2000;
    c.runs = 12;
    c.threads = 1;
    const auto a = run_batch(c);
    c.threads = 4;
    const auto b = run_batch(c);
    const auto again = run_batch(c);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.variance, b.variance);
    EXPECT_EQ(a.aoi_mean, b.aoi_mean);
    EXPECT_EQ(a.weighted_total_aoi_mean, b.weighted_total_aoi_mean);
    EXPECT_EQ(b.max_rel_deficit_median, again.max_rel_deficit_median);
    c.seed = 2;
    EXPECT_NE(run_batch(c).mean, a.mean);
}

TEST(RunBatch, EveryPolicyStaysInsideOuterBound) {
    for (auto policy : {PolicyKind::kVwd, PolicyKind::kWhittle, PolicyKind::kRandomized,
                        PolicyKind::kMaxWeight}) {
        auto c = three_clients(policy);
        c.horizon = 20000;
        c.runs = 100;
        c.checkpoints = {20000};
        const auto b = run_batch(c);
        OperatingPoint empirical;
        for (std::size_t i = 0; i < 3; ++i) {
            empirical.mu.push_back(b.mean[i][0]);
            empirical.sigma2.push_back(b.variance[i][0]);
        }
        std::vector<ChannelParams> ch;
        for (const auto& cl : c.clients) {
            ch.push_back(cl.channel);
        }
        const auto report = check_outer(SecondOrderStats(ch), empirical, 0.02);
        EXPECT_TRUE(report.feasible) << to_string(policy);
    }
}
