#pragma once

// Slotted Monte Carlo engine. Within slot t (1-based) the order is: update
// generation, channel realization, scheduling decision, delivery, then AoI
// sampled at the end of the slot (see aoi.hpp for the timestamp convention).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sosched/aoi.hpp"
#include "sosched/capacity.hpp"
#include "sosched/channel.hpp"
#include "sosched/policies.hpp"

namespace sosched {

struct ClientConfig {
    ChannelParams channel;
    UpdateModel update;
};

struct SimConfig {
    std::vector<ClientConfig> clients;
    std::uint64_t horizon = 20000;
    std::uint64_t runs = 200;
    std::uint64_t seed = 1;
    /// Slots (1-based, ascending) at which delivery counts are sampled. Empty
    /// means default_checkpoints(horizon).
    std::vector<std::uint64_t> checkpoints;
    /// Leading slots excluded from the AoI time average.
    std::uint64_t warmup = 0;
    PolicyKind policy = PolicyKind::kVwd;
    /// Target point; required by vwd, randomized and maxweight. When present
    /// it also drives the deficit bookkeeping for whittle.
    std::optional<OperatingPoint> point;
    bool weight_baselines = false;
    /// Mixed into the per-client streams. Equal salts give common random
    /// numbers across policies; distinct salts give independent traces.
    std::uint64_t trace_salt = 0;
    /// Worker threads for run_batch; 0 picks the hardware concurrency.
    unsigned threads = 0;
};

/// 100 log-spaced slots between 1 and `horizon`, deduplicated, plus `horizon`.
std::vector<std::uint64_t> default_checkpoints(std::uint64_t horizon);

/// Throws ConfigError on an inconsistent configuration.
void validate(const SimConfig& config);

struct RunMetrics {
    /// [client][checkpoint] cumulative deliveries.
    std::vector<std::vector<std::uint64_t>> deliveries;
    /// Per-client time-average AoI over slots warmup+1..T.
    std::vector<double> time_avg_aoi;
    double weighted_total_aoi = 0.0;
    /// max over t of max_i |d_i(t)/sigma_i - D(t)|; zero without a point.
    double max_rel_deficit = 0.0;
    /// Running maximum of the same quantity at each checkpoint.
    std::vector<double> max_rel_deficit_at;
    /// Gaps between successive deliveries, per client.
    std::vector<double> gap_sum;
    std::vector<double> gap_sum_sq;
    std::vector<std::uint64_t> gap_count;
    std::uint64_t total_deliveries = 0;
};

/// Full per-slot record of one episode, for replay and invariant tests.
struct EpisodeTrace {
    std::vector<SubsetMask> on_sets;
    std::vector<Decision> decisions;
    /// [slot][client] after the slot's update.
    std::vector<std::vector<double>> deficits;
    std::vector<std::vector<double>> aoi;
    /// Per client, 1-based slots in which an update was generated / delivered.
    std::vector<std::vector<std::uint64_t>> generation_slots;
    std::vector<std::vector<std::uint64_t>> delivery_slots;
};

/// Simulates run `run_index` of `config`. Deterministic in (seed, run_index,
/// trace_salt). `trace` is filled when non-null.
RunMetrics run_episode(const SimConfig& config, std::uint64_t run_index,
                       EpisodeTrace* trace = nullptr);

struct BatchMetrics {
    std::vector<std::uint64_t> checkpoints;
    /// [client][checkpoint] mean over runs of deliveries(t)/t.
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> mean_stderr;
    /// [client][checkpoint] across-run sample variance of deliveries(t)/sqrt(t).
    std::vector<std::vector<double>> variance;
    std::vector<std::vector<double>> variance_stderr;
    /// [checkpoint] sum over clients of `variance`.
    std::vector<double> total_variance;
    /// Per-client time-average AoI, averaged over runs.
    std::vector<double> aoi_mean;
    std::vector<double> aoi_stderr;
    /// Per-client renewal estimate from the pooled inter-delivery gaps.
    std::vector<double> renewal_aoi;
    double weighted_total_aoi_mean = 0.0;
    double weighted_total_aoi_stderr = 0.0;
    /// [checkpoint] median over runs of the running relative-deficit maximum.
    std::vector<double> max_rel_deficit_median;
    std::uint64_t runs = 0;
};

/// Runs every episode (in parallel when threads allow) and reduces in run
/// order, so the result does not depend on scheduling. Needs runs >= 2.
BatchMetrics run_batch(const SimConfig& config);

/// max_i |d_i/sigma_i - D| with D = sum_i d_i / sum_i sigma_i.
double relative_deficit(std::span<const double> deficits, std::span<const double> sd);

/// Trajectory maximum of relative_deficit over a recorded episode.
double relative_deficit_diagnostic(const EpisodeTrace& trace, const OperatingPoint& point);

} // namespace sosched
