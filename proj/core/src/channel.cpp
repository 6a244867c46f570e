#include "sosched/channel.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "sosched/error.hpp"

namespace sosched {

namespace {

constexpr double kNegativeDust = 1e-12;

void check_subset_members(std::span<const ChannelParams> members) {
    if (members.empty()) {
        throw DomainError("subset statistics are undefined for the empty subset");
    }
}

} // namespace

ChannelParams::ChannelParams(double p, double q) : p_(p), q_(q) {
    if (!(p > 0.0 && p <= 1.0) || !(q > 0.0 && q <= 1.0)) {
        throw DomainError(fmt::format("channel transition probabilities must lie in (0, 1], "
                                      "got p={}, q={}",
                                      p, q));
    }
}

ChannelState step(ChannelState state, const ChannelParams& params, double u) noexcept {
    if (state == ChannelState::kOn) {
        return u < params.p() ? ChannelState::kOff : ChannelState::kOn;
    }
    return u < params.q() ? ChannelState::kOn : ChannelState::kOff;
}

double stationary_off_prob(const ChannelParams& params) noexcept {
    return params.p() / (params.p() + params.q());
}

double stationary_on_prob(const ChannelParams& params) noexcept {
    return params.q() / (params.p() + params.q());
}

double g_correlation(const ChannelParams& params, std::uint64_t k) {
    if (k == 0) {
        throw DomainError("g_correlation: lag must be >= 1");
    }
    const double sum = params.p() + params.q();
    const double rho = 1.0 - sum;
    return params.p() / sum + (params.q() / sum) * std::pow(rho, static_cast<double>(k - 1));
}

double subset_mean(std::span<const ChannelParams> members) {
    check_subset_members(members);
    double all_off = 1.0;
    for (const auto& m : members) {
        all_off *= stationary_off_prob(m);
    }
    return 1.0 - all_off;
}

double subset_variance(std::span<const ChannelParams> members, TruncationOptions options) {
    check_subset_members(members);
    if (options.truncation_k < 1) {
        throw DomainError("subset_variance: truncation_k must be >= 1");
    }
    if (!(options.tail_tol >= 0.0)) {
        throw DomainError("subset_variance: tail_tol must be nonnegative");
    }

    double all_off = 1.0;
    for (const auto& m : members) {
        all_off *= stationary_off_prob(m);
    }

    // Autocovariance of the all-OFF indicator at lag k is
    // (prod G_i(k+1) - prod a_i) prod a_i.
    double series = 0.0;
    for (int k = 1; k <= options.truncation_k; ++k) {
        double joint = 1.0;
        for (const auto& m : members) {
            joint *= g_correlation(m, static_cast<std::uint64_t>(k) + 1);
        }
        const double term = (joint - all_off) * all_off;
        series += term;
        if (std::abs(term) < options.tail_tol) {
            break;
        }
    }

    const double v = 2.0 * series + all_off - all_off * all_off;
    if (v < 0.0) {
        if (v < -kNegativeDust) {
            throw NumericalInconsistency(
                fmt::format("subset_variance evaluated to {} (< 0)", v));
        }
        return 0.0;
    }
    return v;
}

SubsetStats iid_subset_stats(std::span<const double> on_probs) {
    if (on_probs.empty()) {
        throw DomainError("iid_subset_stats: empty subset");
    }
    double all_off = 1.0;
    for (double q : on_probs) {
        if (!(q > 0.0 && q <= 1.0)) {
            throw DomainError(fmt::format("iid_subset_stats: ON probability {} not in (0, 1]", q));
        }
        all_off *= 1.0 - q;
    }
    return {1.0 - all_off, all_off - all_off * all_off};
}

double finite_horizon_variance(const ChannelParams& params, std::uint64_t horizon) {
    if (horizon == 0) {
        throw DomainError("finite_horizon_variance: horizon must be >= 1");
    }
    const double p = params.p();
    const double q = params.q();

    // Generating functions of the ON count split by the final state:
    //   on(z, T)  = z [ (1-p) on(z, T-1) + q off(z, T-1) ]
    //   off(z, T) =      p    on(z, T-1) + (1-q) off(z, T-1)
    // with a stationary state at T = 0. Index 0/1/2 = value/first/second
    // derivative at z = 1.
    double on[3] = {stationary_on_prob(params), 0.0, 0.0};
    double off[3] = {stationary_off_prob(params), 0.0, 0.0};
    for (std::uint64_t t = 0; t < horizon; ++t) {
        double stay_on[3];
        double next_off[3];
        for (int d = 0; d < 3; ++d) {
            stay_on[d] = (1.0 - p) * on[d] + q * off[d];
            next_off[d] = p * on[d] + (1.0 - q) * off[d];
        }
        // Product rule for z * h(z) evaluated at z = 1.
        on[2] = 2.0 * stay_on[1] + stay_on[2];
        on[1] = stay_on[0] + stay_on[1];
        on[0] = stay_on[0];
        for (int d = 0; d < 3; ++d) {
            off[d] = next_off[d];
        }
    }
    const double mean = on[1] + off[1];
    const double factorial_moment = on[2] + off[2];
    return factorial_moment + mean - mean * mean;
}

double finite_horizon_variance_closed_form(const ChannelParams& params,
                                           std::uint64_t horizon) {
    if (horizon == 0) {
        throw DomainError("finite_horizon_variance_closed_form: horizon must be >= 1");
    }
    const double a = stationary_on_prob(params);
    const double b = stationary_off_prob(params);
    const double r = 1.0 - params.p() - params.q();
    const double t = static_cast<double>(horizon);
    return a * b *
           (t * (1.0 + r) / (1.0 - r) -
            2.0 * r * (1.0 - std::pow(r, t)) / ((1.0 - r) * (1.0 - r)));
}

// ---------------------------------------------------------------------------
// SecondOrderStats

SecondOrderStats::SecondOrderStats(std::vector<ChannelParams> params, TruncationOptions options)
    : params_(std::move(params)), options_(options) {
    if (params_.empty()) {
        throw DomainError("SecondOrderStats: at least one client is required");
    }
    if (params_.size() > kMaxClients) {
        throw TooManyClients(fmt::format("SecondOrderStats supports at most {} clients, got {}",
                                         kMaxClients, params_.size()));
    }
    off_probs_.reserve(params_.size());
    for (const auto& p : params_) {
        off_probs_.push_back(stationary_off_prob(p));
    }
    full_ = stats(full_mask());
}

SubsetMask SecondOrderStats::full_mask() const noexcept {
    return static_cast<SubsetMask>((std::uint64_t{1} << params_.size()) - 1);
}

std::vector<ChannelParams> SecondOrderStats::members(SubsetMask subset) const {
    if ((subset & ~full_mask()) != 0) {
        throw DimensionMismatch(
            fmt::format("subset mask {:#x} references clients beyond N={}", subset, n_clients()));
    }
    std::vector<ChannelParams> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (subset & (SubsetMask{1} << i)) {
            out.push_back(params_[i]);
        }
    }
    return out;
}

double SecondOrderStats::mean(SubsetMask subset) const {
    if (subset == 0) {
        return 0.0;
    }
    return subset_mean(members(subset));
}

double SecondOrderStats::variance(SubsetMask subset) const {
    if (subset == 0) {
        return 0.0;
    }
    return subset_variance(members(subset), options_);
}

SubsetStats SecondOrderStats::stats(SubsetMask subset) const {
    return {mean(subset), variance(subset)};
}

std::map<SubsetMask, SubsetStats> SecondOrderStats::materialize() const {
    if (n_clients() > 20) {
        throw TooManyClients("materialize is limited to 20 clients");
    }
    std::map<SubsetMask, SubsetStats> out;
    for (SubsetMask s = 1; s <= full_mask(); ++s) {
        out.emplace(s, stats(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Traces and estimators

Traces::Traces(std::vector<ChannelParams> params, std::size_t horizon, std::size_t runs)
    : params_(std::move(params)), horizon_(horizon), runs_(runs),
      data_(params_.size() * horizon * runs, 0) {}

std::size_t Traces::index(std::size_t run, std::size_t client, std::size_t slot) const {
    return (run * params_.size() + client) * horizon_ + slot;
}

bool Traces::on(std::size_t run, std::size_t client, std::size_t slot) const {
    return data_.at(index(run, client, slot)) != 0;
}

void Traces::set(std::size_t run, std::size_t client, std::size_t slot, bool on) {
    data_.at(index(run, client, slot)) = on ? 1 : 0;
}

namespace {

/// Walks one channel trace; shared by the stored and streaming samplers so
/// both consume identical draws.
class ChannelWalker {
public:
    ChannelWalker(const ChannelParams& params, std::uint64_t seed, std::uint64_t run,
                  std::uint64_t client)
        : params_(params), engine_(make_stream(seed, run, client, StreamKind::kChannel)) {
        state_ = uniform01(engine_) < stationary_on_prob(params_) ? ChannelState::kOn
                                                                    : ChannelState::kOff;
    }

    bool on() const noexcept { return state_ == ChannelState::kOn; }
    void advance() { state_ = step(state_, params_, uniform01(engine_)); }

private:
    ChannelParams params_;
    Engine engine_;
    ChannelState state_;
};

void check_sampling_args(std::size_t horizon, std::size_t runs) {
    if (horizon == 0) {
        throw DomainError("horizon must be >= 1");
    }
    if (runs == 0) {
        throw DomainError("runs must be >= 1");
    }
}

/// Accumulates per-run centred counts into the estimator.
class SubsetAccumulator {
public:
    SubsetAccumulator(double closed_form_mean, std::size_t checkpoint)
        : m_(closed_form_mean), t_(static_cast<double>(checkpoint)) {}

    void add_run(std::uint64_t on_count) {
        const double frac = static_cast<double>(on_count) / t_;
        const double y = (static_cast<double>(on_count) - t_ * m_) / std::sqrt(t_);
        fracs_.push_back(frac);
        sq_.push_back(y * y);
    }

    EmpiricalSubsetStats finish() const {
        const auto n = static_cast<double>(fracs_.size());
        EmpiricalSubsetStats out;
        double sum_f = 0.0;
        double sum_sq = 0.0;
        for (std::size_t r = 0; r < fracs_.size(); ++r) {
            sum_f += fracs_[r];
            sum_sq += sq_[r];
        }
        out.mean = sum_f / n;
        out.variance = sum_sq / n;
        double var_f = 0.0;
        double var_sq = 0.0;
        for (std::size_t r = 0; r < fracs_.size(); ++r) {
            var_f += (fracs_[r] - out.mean) * (fracs_[r] - out.mean);
            var_sq += (sq_[r] - out.variance) * (sq_[r] - out.variance);
        }
        out.mean_stderr = std::sqrt(var_f / (n - 1.0) / n);
        out.variance_stderr = std::sqrt(var_sq / (n - 1.0) / n);
        return out;
    }

private:
    double m_;
    double t_;
    std::vector<double> fracs_;
    std::vector<double> sq_;
};

} // namespace

Traces sample_traces(std::span<const ChannelParams> params, std::size_t horizon,
                     std::size_t runs, std::uint64_t seed) {
    check_sampling_args(horizon, runs);
    Traces traces({params.begin(), params.end()}, horizon, runs);
    for (std::size_t r = 0; r < runs; ++r) {
        for (std::size_t c = 0; c < params.size(); ++c) {
            ChannelWalker walker(params[c], seed, r, c);
            for (std::size_t t = 0; t < horizon; ++t) {
                if (t > 0) {
                    walker.advance();
                }
                traces.set(r, c, t, walker.on());
            }
        }
    }
    return traces;
}

EmpiricalSubsetStats empirical_subset_stats(const Traces& traces, SubsetMask subset,
                                            std::size_t checkpoint) {
    if (traces.n_runs() < 2) {
        throw InsufficientRuns("empirical_subset_stats needs at least two runs");
    }
    if (checkpoint == 0 || checkpoint > traces.horizon()) {
        throw DomainError(fmt::format("checkpoint {} outside [1, {}]", checkpoint,
                                      traces.horizon()));
    }
    const SecondOrderStats model({traces.params().begin(), traces.params().end()});
    SubsetAccumulator acc(model.mean(subset), checkpoint);
    for (std::size_t r = 0; r < traces.n_runs(); ++r) {
        std::uint64_t count = 0;
        for (std::size_t t = 0; t < checkpoint; ++t) {
            for (std::size_t c = 0; c < traces.n_clients(); ++c) {
                if ((subset & (SubsetMask{1} << c)) && traces.on(r, c, t)) {
                    ++count;
                    break;
                }
            }
        }
        acc.add_run(count);
    }
    return acc.finish();
}

EmpiricalSubsetStats estimate_subset_stats(std::span<const ChannelParams> params,
                                           SubsetMask subset, std::size_t horizon,
                                           std::size_t runs, std::uint64_t seed) {
    check_sampling_args(horizon, runs);
    if (runs < 2) {
        throw InsufficientRuns("estimate_subset_stats needs at least two runs");
    }
    const SecondOrderStats model({params.begin(), params.end()});
    SubsetAccumulator acc(model.mean(subset), horizon);
    for (std::size_t r = 0; r < runs; ++r) {
        std::vector<ChannelWalker> walkers;
        for (std::size_t c = 0; c < params.size(); ++c) {
            if (subset & (SubsetMask{1} << c)) {
                walkers.emplace_back(params[c], seed, r, c);
            }
        }
        std::uint64_t count = 0;
        for (std::size_t t = 0; t < horizon; ++t) {
            bool any_on = false;
            for (auto& w : walkers) {
                if (t > 0) {
                    w.advance();
                }
                any_on = any_on || w.on();
            }
            count += any_on ? 1 : 0;
        }
        acc.add_run(count);
    }
    return acc.finish();
}

} // namespace sosched
