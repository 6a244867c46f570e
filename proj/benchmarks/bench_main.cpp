#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "sosched/capacity.hpp"
#include "sosched/channel.hpp"
#include "sosched/sim.hpp"
#include "sosched/solver.hpp"

using namespace sosched;

namespace {

std::vector<ChannelParams> random_channels(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::vector<ChannelParams> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.emplace_back(u(g), u(g));
    }
    return out;
}

std::vector<UpdateModel> random_updates(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<UpdateModel> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.emplace_back(u(g) / static_cast<double>(n));
    }
    return out;
}

void BM_MostViolatedSubset(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const SecondOrderStats stats(random_channels(n, 1));
    const auto mu = proportional_point(stats);
    for (auto _ : state) {
        benchmark::DoNotOptimize(most_violated_subset(stats, mu));
    }
    state.SetItemsProcessed(state.iterations() * ((std::int64_t{1} << n) - 2));
}
BENCHMARK(BM_MostViolatedSubset)->DenseRange(4, 20, 4);

void BM_SubsetVariance(benchmark::State& state) {
    const auto members = random_channels(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(subset_variance(members));
    }
}
BENCHMARK(BM_SubsetVariance)->Arg(1)->Arg(3)->Arg(10);

void BM_FiniteHorizonVariance(benchmark::State& state) {
    const ChannelParams c(0.3, 0.4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(finite_horizon_variance(c, 10000));
    }
}
BENCHMARK(BM_FiniteHorizonVariance);

void BM_Solver(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const SecondOrderStats stats(random_channels(n, 3));
    const auto updates = random_updates(n, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_operating_point(stats, updates));
    }
}
BENCHMARK(BM_Solver)->Arg(2)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Episode(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto policy = static_cast<PolicyKind>(state.range(1));
    const auto channels = random_channels(n, 5);
    const auto updates = random_updates(n, 6);
    SimConfig config;
    for (std::size_t i = 0; i < n; ++i) {
        config.clients.push_back({channels[i], updates[i]});
    }
    config.point = solve_operating_point(SecondOrderStats(channels), updates).point;
    config.policy = policy;
    config.horizon = 20000;
    std::uint64_t run = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_episode(config, run++));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(config.horizon));
    state.SetLabel(std::string(to_string(policy)));
}
BENCHMARK(BM_Episode)
    ->ArgsProduct({{5, 10}, {0, 1, 2, 3}})
    ->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
