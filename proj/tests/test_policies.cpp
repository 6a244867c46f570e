#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sosched/error.hpp"
#include "sosched/policies.hpp"

using namespace sosched;

namespace {

SchedulerState state_with(std::vector<double> deficits, std::vector<double> aoi) {
    SchedulerState s = SchedulerState::initial(deficits.size());
    s.deficits = std::move(deficits);
    s.aoi = std::move(aoi);
    return s;
}

} // namespace

TEST(ParsePolicy, NamesRoundTrip) {
    for (auto k : {PolicyKind::kVwd, PolicyKind::kWhittle, PolicyKind::kRandomized,
                   PolicyKind::kMaxWeight}) {
        EXPECT_EQ(parse_policy(to_string(k)), k);
    }
    EXPECT_THROW(parse_policy("round_robin"), ConfigError);
}

TEST(Vwd, PicksLargestScaledDeficit) {
    const OperatingPoint point{{0.3, 0.3, 0.3}, {0.25, 1.0, 0.0625}};
    // Scaled deficits: 2.5/0.5 = 5, 6/1 = 6, 1.25/0.25 = 5.
    const auto s = state_with({2.5, 6.0, 1.25}, {0, 0, 0});
    EXPECT_EQ(vwd_select(s, point, 0b111).scheduled, 1U);
    EXPECT_EQ(vwd_select(s, point, 0b101).scheduled, 0U);  // tie 5 vs 5: lowest index
    EXPECT_FALSE(vwd_select(s, point, 0).scheduled.has_value());
}

TEST(Vwd, RejectsNonPositiveVariance) {
    const OperatingPoint point{{0.3, 0.3}, {0.04, 0.0}};
    const auto s = state_with({0.0, 0.0}, {0, 0});
    EXPECT_THROW(vwd_select(s, point, 0b11), DomainError);
}

TEST(Vwd, InvariantToCommonShift) {
    std::mt19937_64 g(51);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_real_distribution<double> v(0.01, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 4;
        OperatingPoint point{std::vector<double>(n, 0.2), {}};
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) {
            point.sigma2.push_back(v(g));
            d[i] = u(g);
        }
        const double shift = u(g);
        std::vector<double> shifted(n);
        for (std::size_t i = 0; i < n; ++i) {
            shifted[i] = d[i] + shift * std::sqrt(point.sigma2[i]);
        }
        const auto on = static_cast<SubsetMask>(g() & 0xF);
        EXPECT_EQ(vwd_select(state_with(d, std::vector<double>(n)), point, on),
                  vwd_select(state_with(shifted, std::vector<double>(n)), point, on));
    }
}

TEST(Deficits, IdleSlotsAccumulateRate) {
    const OperatingPoint point{{0.25, 0.5}, {0.1, 0.1}};
    auto s = SchedulerState::initial(2);
    for (int t = 0; t < 8; ++t) {
        update_deficits(s, point, {}, false);
    }
    EXPECT_DOUBLE_EQ(s.deficits[0], 2.0);
    EXPECT_DOUBLE_EQ(s.deficits[1], 4.0);
    EXPECT_EQ(s.slot, 8U);
    update_deficits(s, point, {1U}, true);
    EXPECT_DOUBLE_EQ(s.deficits[1], 3.5);
}

TEST(Whittle, IndexAndTies) {
    const ChannelParams c(0.2, 0.8);
    EXPECT_NEAR(whittle_index(3.0, c), 4.5 - 1.5 + 3.0 / 0.8, 1e-15);
    const std::vector<ChannelParams> channels{c, c, c};
    const auto s = state_with({0, 0, 0}, {4.0, 4.0, 2.0});
    EXPECT_EQ(whittle_select(s, channels, 0b111).scheduled, 0U);
    EXPECT_EQ(whittle_select(s, channels, 0b110).scheduled, 1U);
    EXPECT_FALSE(whittle_select(s, channels, 0).scheduled.has_value());
    const std::vector<double> weights{1.0, 1.0, 10.0};
    EXPECT_EQ(whittle_select(s, channels, 0b111, weights).scheduled, 2U);
}

TEST(Randomized, InverseCdfInIndexOrder) {
    const OperatingPoint point{{0.1, 0.3, 0.6}, {0.1, 0.1, 0.1}};
    EXPECT_EQ(randomized_select(point, 0b111, 0.05).scheduled, 0U);
    EXPECT_EQ(randomized_select(point, 0b111, 0.2).scheduled, 1U);
    EXPECT_EQ(randomized_select(point, 0b111, 0.95).scheduled, 2U);
    // Only clients 0 and 2 ON: split 1/7 vs 6/7.
    EXPECT_EQ(randomized_select(point, 0b101, 0.14).scheduled, 0U);
    EXPECT_EQ(randomized_select(point, 0b101, 0.15).scheduled, 2U);
    EXPECT_FALSE(randomized_select(point, 0, 0.5).scheduled.has_value());
    const OperatingPoint zero{{0.0, 0.0}, {0.1, 0.1}};
    EXPECT_THROW(randomized_select(zero, 0b11, 0.5), DomainError);
}

TEST(Randomized, FrequenciesFollowRates) {
    const OperatingPoint point{{0.1, 0.3, 0.6}, {0.1, 0.1, 0.1}};
    std::mt19937_64 g(52);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> counts(3, 0);
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        ++counts[*randomized_select(point, 0b111, u(g)).scheduled];
    }
    for (std::size_t i = 0; i < 3; ++i) {
        const double p = point.mu[i];
        EXPECT_NEAR(counts[i] / static_cast<double>(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
    }
}

TEST(MaxWeight, ScoresAgeAboveExpectedGeneration) {
    const std::vector<UpdateModel> updates{UpdateModel(0.5), UpdateModel(0.1)};
    const OperatingPoint point{{0.2, 0.4}, {0.1, 0.1}};
    // Scores: (6-2)/0.2 = 20 and (12-10)/0.4 = 5.
    const auto s = state_with({0, 0}, {6.0, 12.0});
    EXPECT_EQ(maxweight_select(s, updates, point, 0b11).scheduled, 0U);
    EXPECT_EQ(maxweight_select(s, updates, point, 0b10).scheduled, 1U);
    const OperatingPoint bad{{0.0, 0.4}, {0.1, 0.1}};
    EXPECT_THROW(maxweight_select(s, updates, bad, 0b11), DomainError);
}

TEST(Scheduler, WorkConservingForEveryPolicy) {
    const std::vector<ChannelParams> channels{{0.3, 0.2}, {0.5, 0.5}, {0.1, 0.6}};
    const std::vector<UpdateModel> updates{UpdateModel(0.3), UpdateModel(0.2), UpdateModel(0.1)};
    const OperatingPoint point{{0.2, 0.3, 0.25}, {0.01, 0.02, 0.03}};
    std::mt19937_64 g(53);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto kind : {PolicyKind::kVwd, PolicyKind::kWhittle, PolicyKind::kRandomized,
                      PolicyKind::kMaxWeight}) {
        const Scheduler sched(kind, channels, updates, point);
        for (int trial = 0; trial < 300; ++trial) {
            const auto s = state_with({u(g) - 0.5, u(g) - 0.5, u(g) - 0.5},
                                      {1 + 20 * u(g), 1 + 20 * u(g), 1 + 20 * u(g)});
            const auto on = static_cast<SubsetMask>(g() & 0b111);
            const auto d = sched.select(s, on, u(g));
            EXPECT_EQ(d.scheduled.has_value(), on != 0);
            if (d.scheduled) {
                EXPECT_TRUE((on >> *d.scheduled) & 1U);
            }
        }
    }
}

TEST(Scheduler, ConstructionChecks) {
    const std::vector<ChannelParams> channels{{0.3, 0.2}};
    const std::vector<UpdateModel> updates{UpdateModel(0.3)};
    EXPECT_THROW(Scheduler(PolicyKind::kVwd, channels, updates, std::nullopt), ConfigError);
    EXPECT_NO_THROW(Scheduler(PolicyKind::kWhittle, channels, updates, std::nullopt));
    const OperatingPoint zero_var{{0.2}, {0.0}};
    EXPECT_THROW(Scheduler(PolicyKind::kVwd, channels, updates, zero_var), DomainError);
    const OperatingPoint wrong{{0.2, 0.1}, {0.1, 0.1}};
    EXPECT_THROW(Scheduler(PolicyKind::kRandomized, channels, updates, wrong), DimensionMismatch);
}
