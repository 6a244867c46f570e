#include "sosched/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "sosched/error.hpp"
#include "sosched/rng.hpp"

namespace sosched {

namespace {

constexpr std::uint64_t kSaltMix = 0x9E3779B97F4A7C15ULL;

std::vector<std::uint64_t> resolved_checkpoints(const SimConfig& config) {
    return config.checkpoints.empty() ? default_checkpoints(config.horizon) : config.checkpoints;
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) {
        return hi;
    }
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // sample variance, divisor n-1
    double mean_stderr = 0.0;
    double variance_stderr = 0.0;
};

Moments moments(std::span<const double> x) {
    const auto n = static_cast<double>(x.size());
    Moments m;
    for (double v : x) {
        m.mean += v;
    }
    m.mean /= n;
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : x) {
        const double d = (v - m.mean) * (v - m.mean);
        m2 += d;
        m4 += d * d;
    }
    m.variance = m2 / (n - 1.0);
    m.mean_stderr = std::sqrt(m.variance / n);
    // Large-sample standard error of the sample variance.
    const double fourth = m4 / n;
    const double s4 = m.variance * m.variance;
    m.variance_stderr = std::sqrt(std::max(fourth - s4 * (n - 3.0) / (n - 1.0), 0.0) / n);
    return m;
}

} // namespace

std::vector<std::uint64_t> default_checkpoints(std::uint64_t horizon) {
    std::vector<std::uint64_t> out;
    const double log_t = std::log(static_cast<double>(horizon));
    for (int k = 0; k < 100; ++k) {
        const auto t = static_cast<std::uint64_t>(std::llround(std::exp(log_t * k / 99.0)));
        out.push_back(std::clamp<std::uint64_t>(t, 1, horizon));
    }
    out.push_back(horizon);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void validate(const SimConfig& config) {
    const std::size_t n = config.clients.size();
    if (n == 0) {
        throw ConfigError("simulation needs at least one client");
    }
    if (n > kMaxClients) {
        throw ConfigError(fmt::format("at most {} clients are supported", kMaxClients));
    }
    if (config.horizon == 0) {
        throw ConfigError("horizon must be >= 1");
    }
    if (config.runs == 0) {
        throw ConfigError("runs must be >= 1");
    }
    if (config.warmup >= config.horizon) {
        throw ConfigError("warmup must be smaller than the horizon");
    }
    for (std::size_t k = 0; k < config.checkpoints.size(); ++k) {
        const auto t = config.checkpoints[k];
        if (t < 1 || t > config.horizon) {
            throw ConfigError(fmt::format("checkpoint {} outside [1, {}]", t, config.horizon));
        }
        if (k > 0 && t <= config.checkpoints[k - 1]) {
            throw ConfigError("checkpoints must be strictly increasing");
        }
    }
    if (config.point) {
        if (config.point->mu.size() != n || config.point->sigma2.size() != n) {
            throw ConfigError("operating point dimensions do not match the client list");
        }
    } else if (config.policy != PolicyKind::kWhittle) {
        throw ConfigError(
            fmt::format("policy '{}' requires an operating point", to_string(config.policy)));
    }
}

double relative_deficit(std::span<const double> deficits, std::span<const double> sd) {
    double sum_d = 0.0;
    double sum_sd = 0.0;
    for (std::size_t i = 0; i < deficits.size(); ++i) {
        sum_d += deficits[i];
        sum_sd += sd[i];
    }
    const double common = sum_d / sum_sd;
    double worst = 0.0;
    for (std::size_t i = 0; i < deficits.size(); ++i) {
        worst = std::max(worst, std::abs(deficits[i] / sd[i] - common));
    }
    return worst;
}

double relative_deficit_diagnostic(const EpisodeTrace& trace, const OperatingPoint& point) {
    std::vector<double> sd;
    for (double s2 : point.sigma2) {
        if (!(s2 > 0.0)) {
            throw DomainError("relative_deficit_diagnostic needs sigma2 > 0");
        }
        sd.push_back(std::sqrt(s2));
    }
    double worst = 0.0;
    for (const auto& d : trace.deficits) {
        worst = std::max(worst, relative_deficit(d, sd));
    }
    return worst;
}

RunMetrics run_episode(const SimConfig& config, std::uint64_t run_index, EpisodeTrace* trace) {
    validate(config);
    const std::size_t n = config.clients.size();
    const auto checkpoints = resolved_checkpoints(config);

    std::vector<ChannelParams> channels;
    std::vector<UpdateModel> updates;
    for (const auto& c : config.clients) {
        channels.push_back(c.channel);
        updates.push_back(c.update);
    }
    const Scheduler scheduler(config.policy, channels, updates, config.point,
                              {config.weight_baselines});

    const std::uint64_t stream_seed = config.seed + config.trace_salt * kSaltMix;
    std::vector<Engine> engines;
    engines.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        engines.push_back(make_stream(stream_seed, run_index, i, StreamKind::kClient));
    }
    Engine policy_engine = make_stream(config.seed, run_index, n, StreamKind::kPolicy);

    const bool track_deficits = config.point.has_value();
    std::vector<double> sd(n, 1.0);
    bool diagnostic = track_deficits;
    if (track_deficits) {
        for (std::size_t i = 0; i < n; ++i) {
            diagnostic = diagnostic && config.point->sigma2[i] > 0.0;
            sd[i] = std::sqrt(std::max(config.point->sigma2[i], 0.0));
        }
    }

    RunMetrics m;
    m.deliveries.assign(n, std::vector<std::uint64_t>(checkpoints.size(), 0));
    m.time_avg_aoi.assign(n, 0.0);
    m.max_rel_deficit_at.assign(checkpoints.size(), 0.0);
    m.gap_sum.assign(n, 0.0);
    m.gap_sum_sq.assign(n, 0.0);
    m.gap_count.assign(n, 0);

    if (trace) {
        *trace = EpisodeTrace{};
        trace->generation_slots.resize(n);
        trace->delivery_slots.resize(n);
    }

    SchedulerState state = SchedulerState::initial(n);
    std::vector<ChannelState> channel_state(n, ChannelState::kOff);
    std::vector<std::uint64_t> sensor_stamp(n, 0);
    std::vector<std::uint64_t> ap_stamp(n, 0);
    std::vector<std::uint64_t> delivered(n, 0);
    std::vector<std::uint64_t> last_delivery(n, 0);
    std::vector<double> aoi_sum(n, 0.0);
    std::size_t next_checkpoint = 0;

    for (std::uint64_t t = 1; t <= config.horizon; ++t) {
        SubsetMask on_set = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u_update = uniform01(engines[i]);
            const double u_channel = uniform01(engines[i]);
            if (u_update < updates[i].lambda()) {
                sensor_stamp[i] = t - 1;
                if (trace) {
                    trace->generation_slots[i].push_back(t);
                }
            }
            if (t == 1) {
                channel_state[i] = u_channel < stationary_on_prob(channels[i])
                                       ? ChannelState::kOn
                                       : ChannelState::kOff;
            } else {
                channel_state[i] = step(channel_state[i], channels[i], u_channel);
            }
            if (channel_state[i] == ChannelState::kOn) {
                on_set |= SubsetMask{1} << i;
            }
        }

        const double u_policy = scheduler.needs_uniform() ? uniform01(policy_engine) : 0.0;
        const Decision decision = scheduler.select(state, on_set, u_policy);
        if (decision.scheduled) {
            const std::size_t i = *decision.scheduled;
            ap_stamp[i] = sensor_stamp[i];
            ++delivered[i];
            ++m.total_deliveries;
            if (last_delivery[i] > 0) {
                const auto gap = static_cast<double>(t - last_delivery[i]);
                m.gap_sum[i] += gap;
                m.gap_sum_sq[i] += gap * gap;
                ++m.gap_count[i];
            }
            last_delivery[i] = t;
            if (trace) {
                trace->delivery_slots[i].push_back(t);
            }
        }

        if (track_deficits) {
            update_deficits(state, *config.point, decision, decision.scheduled.has_value());
        } else {
            ++state.slot;
        }
        for (std::size_t i = 0; i < n; ++i) {
            state.aoi[i] = static_cast<double>(t - ap_stamp[i]);
            if (t > config.warmup) {
                aoi_sum[i] += state.aoi[i];
            }
        }
        if (diagnostic) {
            m.max_rel_deficit = std::max(m.max_rel_deficit, relative_deficit(state.deficits, sd));
        }
        if (trace) {
            trace->on_sets.push_back(on_set);
            trace->decisions.push_back(decision);
            trace->deficits.push_back(state.deficits);
            trace->aoi.push_back(state.aoi);
        }
        while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == t) {
            for (std::size_t i = 0; i < n; ++i) {
                m.deliveries[i][next_checkpoint] = delivered[i];
            }
            m.max_rel_deficit_at[next_checkpoint] = m.max_rel_deficit;
            ++next_checkpoint;
        }
    }

    const auto counted = static_cast<double>(config.horizon - config.warmup);
    for (std::size_t i = 0; i < n; ++i) {
        m.time_avg_aoi[i] = aoi_sum[i] / counted;
        m.weighted_total_aoi += updates[i].weight() * m.time_avg_aoi[i];
    }
    return m;
}

BatchMetrics run_batch(const SimConfig& config) {
    validate(config);
    if (config.runs < 2) {
        throw InsufficientRuns("run_batch needs at least two runs");
    }
    const std::size_t n = config.clients.size();
    const auto checkpoints = resolved_checkpoints(config);
    const auto runs = static_cast<std::size_t>(config.runs);

    std::vector<RunMetrics> results(runs);
    unsigned threads = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
    threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(runs));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t r = next++; r < runs; r = next++) {
            try {
                results[r] = run_episode(config, r);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = runs;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < threads; ++k) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    BatchMetrics b;
    b.runs = config.runs;
    b.checkpoints = checkpoints;
    const std::size_t nc = checkpoints.size();
    b.mean.assign(n, std::vector<double>(nc));
    b.mean_stderr = b.variance = b.variance_stderr = b.mean;
    b.total_variance.assign(nc, 0.0);
    b.max_rel_deficit_median.assign(nc, 0.0);

    std::vector<double> column(runs);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < nc; ++k) {
            const auto t = static_cast<double>(checkpoints[k]);
            for (std::size_t r = 0; r < runs; ++r) {
                column[r] = static_cast<double>(results[r].deliveries[i][k]) / std::sqrt(t);
            }
            const Moments mo = moments(column);
            // deliveries/t = (deliveries/sqrt t)/sqrt t
            b.mean[i][k] = mo.mean / std::sqrt(t);
            b.mean_stderr[i][k] = mo.mean_stderr / std::sqrt(t);
            b.variance[i][k] = mo.variance;
            b.variance_stderr[i][k] = mo.variance_stderr;
            b.total_variance[k] += mo.variance;
        }
    }
    for (std::size_t k = 0; k < nc; ++k) {
        for (std::size_t r = 0; r < runs; ++r) {
            column[r] = results[r].max_rel_deficit_at[k];
        }
        b.max_rel_deficit_median[k] = median(column);
    }

    b.aoi_mean.resize(n);
    b.aoi_stderr.resize(n);
    b.renewal_aoi.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double gap_sum = 0.0;
        double gap_sq = 0.0;
        for (std::size_t r = 0; r < runs; ++r) {
            column[r] = results[r].time_avg_aoi[i];
            gap_sum += results[r].gap_sum[i];
            gap_sq += results[r].gap_sum_sq[i];
        }
        const Moments mo = moments(column);
        b.aoi_mean[i] = mo.mean;
        b.aoi_stderr[i] = mo.mean_stderr;
        if (gap_sum > 0.0) {
            b.renewal_aoi[i] =
                gap_sq / (2.0 * gap_sum) + 1.0 / config.clients[i].update.lambda() - 0.5;
        }
    }
    for (std::size_t r = 0; r < runs; ++r) {
        column[r] = results[r].weighted_total_aoi;
    }
    const Moments total = moments(column);
    b.weighted_total_aoi_mean = total.mean;
    b.weighted_total_aoi_stderr = total.mean_stderr;
    return b;
}

} // namespace sosched
