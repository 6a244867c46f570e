#pragma once

// Gilbert-Elliott ON/OFF channels: per-slot evolution, closed-form
// second-order statistics of "at least one client in S is ON", the exact
// finite-horizon variance of a single channel's ON count, and Monte Carlo
// estimators for all of the above.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "sosched/rng.hpp"

namespace sosched {

/// Bitmask over client indices; bit i set means client i is in the subset.
using SubsetMask = std::uint32_t;

inline constexpr std::size_t kMaxClients = 31;

/// Transition probabilities of a two-state Markov channel. p is G->B (ON to
/// OFF), q is B->G. Both must lie in (0, 1] so the chain is positive recurrent.
class ChannelParams {
public:
    ChannelParams(double p, double q);

    double p() const noexcept { return p_; }
    double q() const noexcept { return q_; }

    friend bool operator==(const ChannelParams&, const ChannelParams&) = default;

private:
    double p_;
    double q_;
};

enum class ChannelState : std::uint8_t { kOff = 0, kOn = 1 };

/// One slot of the chain. From ON the channel turns OFF iff u < p; from OFF it
/// turns ON iff u < q.
ChannelState step(ChannelState state, const ChannelParams& params, double u) noexcept;

/// p / (p + q).
double stationary_off_prob(const ChannelParams& params) noexcept;

/// q / (p + q).
double stationary_on_prob(const ChannelParams& params) noexcept;

/// Prob(OFF at slot k | OFF at slot 1) = p/(p+q) + q/(p+q) (1-p-q)^(k-1).
/// Throws DomainError for k == 0.
double g_correlation(const ChannelParams& params, std::uint64_t k);

struct SubsetStats {
    double mean = 0.0;
    double variance = 0.0;
};

struct TruncationOptions {
    /// Maximum number of lag terms in the autocovariance sum.
    int truncation_k = 100;
    /// Stop early once a summand's magnitude drops below this.
    double tail_tol = 1e-12;
};

/// Long-run fraction of slots in which at least one channel in the list is ON.
/// Throws DomainError on an empty list.
double subset_mean(std::span<const ChannelParams> members);

/// Temporal variance of the subset-ON indicator (autocovariance series,
/// truncated per `options`). Throws NumericalInconsistency if the result is
/// negative beyond rounding dust.
double subset_variance(std::span<const ChannelParams> members, TruncationOptions options = {});

/// Both statistics for channels that are i.i.d. across slots, given per-client
/// ON probabilities.
SubsetStats iid_subset_stats(std::span<const double> on_probs);

/// Variance of the number of ON slots among `horizon` consecutive slots of a
/// stationary chain. Computed by iterating the two-state generating-function
/// recursion and tracking its first and second derivatives at z = 1.
double finite_horizon_variance(const ChannelParams& params, std::uint64_t horizon);

/// Same quantity in closed form:
///   a b [ T (1+r)/(1-r) - 2 r (1 - r^T) / (1-r)^2 ],  r = 1-p-q.
double finite_horizon_variance_closed_form(const ChannelParams& params, std::uint64_t horizon);

/// The channel model of a whole system: the map S -> (m_S, v_S^2) evaluated
/// lazily, with the full-set entry computed once at construction.
class SecondOrderStats {
public:
    explicit SecondOrderStats(std::vector<ChannelParams> params, TruncationOptions options = {});

    std::size_t n_clients() const noexcept { return params_.size(); }
    SubsetMask full_mask() const noexcept;

    std::span<const ChannelParams> params() const noexcept { return params_; }
    /// Stationary OFF probability per client, in index order.
    std::span<const double> off_probs() const noexcept { return off_probs_; }

    /// m_S; zero for the empty subset.
    double mean(SubsetMask subset) const;
    /// v_S^2; zero for the empty subset.
    double variance(SubsetMask subset) const;
    SubsetStats stats(SubsetMask subset) const;
    const SubsetStats& full() const noexcept { return full_; }

    /// Every non-empty subset. Limited to 20 clients.
    std::map<SubsetMask, SubsetStats> materialize() const;

private:
    std::vector<ChannelParams> members(SubsetMask subset) const;

    std::vector<ChannelParams> params_;
    std::vector<double> off_probs_;
    TruncationOptions options_;
    SubsetStats full_;
};

/// Stored per-slot ON indicators for R runs of N independent channels.
/// Slots are 0-based here: slot 0 is the stationary initial draw.
class Traces {
public:
    Traces(std::vector<ChannelParams> params, std::size_t horizon, std::size_t runs);

    std::size_t n_runs() const noexcept { return runs_; }
    std::size_t n_clients() const noexcept { return params_.size(); }
    std::size_t horizon() const noexcept { return horizon_; }
    std::span<const ChannelParams> params() const noexcept { return params_; }

    bool on(std::size_t run, std::size_t client, std::size_t slot) const;
    void set(std::size_t run, std::size_t client, std::size_t slot, bool on);

private:
    std::size_t index(std::size_t run, std::size_t client, std::size_t slot) const;

    std::vector<ChannelParams> params_;
    std::size_t horizon_;
    std::size_t runs_;
    std::vector<std::uint8_t> data_;
};

/// Independent stationary-start traces; stream per (run, client) derived from
/// `seed`, so identical seeds give identical traces.
Traces sample_traces(std::span<const ChannelParams> params, std::size_t horizon,
                     std::size_t runs, std::uint64_t seed);

struct EmpiricalSubsetStats {
    double mean = 0.0;
    double mean_stderr = 0.0;
    double variance = 0.0;
    double variance_stderr = 0.0;
};

/// Estimates (m_S, v_S^2) from the first `checkpoint` slots of every run.
/// The variance is the across-run mean of ((sum X_S - t m_S)/sqrt t)^2,
/// centred on the closed-form m_S. Requires at least two runs.
EmpiricalSubsetStats empirical_subset_stats(const Traces& traces, SubsetMask subset,
                                            std::size_t checkpoint);

/// Streaming equivalent of empirical_subset_stats(sample_traces(...), S, T):
/// identical numbers without materializing the traces.
EmpiricalSubsetStats estimate_subset_stats(std::span<const ChannelParams> params,
                                           SubsetMask subset, std::size_t horizon,
                                           std::size_t runs, std::uint64_t seed);

} // namespace sosched
