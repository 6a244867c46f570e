#include "sosched/policies.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "sosched/error.hpp"

namespace sosched {

namespace {

bool is_on(SubsetMask on_set, std::size_t i) { return (on_set >> i) & 1U; }

/// Lowest-index argmax of score(i) over ON clients.
template <typename Score>
Decision argmax_on(std::size_t n, SubsetMask on_set, Score&& score) {
    Decision d;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_on(on_set, i)) {
            continue;
        }
        const double s = score(i);
        if (!d.scheduled || s > best) {
            d.scheduled = i;
            best = s;
        }
    }
    return d;
}

double weight_at(std::span<const double> weights, std::size_t i) {
    return weights.empty() ? 1.0 : weights[i];
}

} // namespace

PolicyKind parse_policy(std::string_view name) {
    if (name == "vwd") {
        return PolicyKind::kVwd;
    }
    if (name == "whittle") {
        return PolicyKind::kWhittle;
    }
    if (name == "randomized") {
        return PolicyKind::kRandomized;
    }
    if (name == "maxweight") {
        return PolicyKind::kMaxWeight;
    }
    throw ConfigError(fmt::format("unknown policy '{}' (expected vwd, whittle, randomized or "
                                  "maxweight)",
                                  name));
}

std::string_view to_string(PolicyKind kind) noexcept {
    switch (kind) {
    case PolicyKind::kVwd:
        return "vwd";
    case PolicyKind::kWhittle:
        return "whittle";
    case PolicyKind::kRandomized:
        return "randomized";
    case PolicyKind::kMaxWeight:
        return "maxweight";
    }
    return "unknown";
}

SchedulerState SchedulerState::initial(std::size_t n_clients) {
    return {std::vector<double>(n_clients, 0.0), std::vector<double>(n_clients, 0.0), 0};
}

Decision vwd_select(const SchedulerState& state, const OperatingPoint& point,
                    SubsetMask on_set) {
    const std::size_t n = state.deficits.size();
    if (point.sigma2.size() != n) {
        throw DimensionMismatch("vwd_select: state and operating point differ in size");
    }
    for (double s2 : point.sigma2) {
        if (!(s2 > 0.0)) {
            throw DomainError(fmt::format("vwd_select: sigma2 must be positive, got {}", s2));
        }
    }
    return argmax_on(n, on_set,
                     [&](std::size_t i) { return state.deficits[i] / std::sqrt(point.sigma2[i]); });
}

void update_deficits(SchedulerState& state, const OperatingPoint& point, const Decision& decision,
                     bool delivered) {
    for (std::size_t i = 0; i < state.deficits.size(); ++i) {
        state.deficits[i] += point.mu[i];
    }
    if (decision.scheduled && delivered) {
        state.deficits[*decision.scheduled] -= 1.0;
    }
    ++state.slot;
}

double whittle_index(double aoi, const ChannelParams& params) noexcept {
    return aoi * aoi / 2.0 - aoi / 2.0 + aoi / stationary_on_prob(params);
}

Decision whittle_select(const SchedulerState& state, std::span<const ChannelParams> channels,
                        SubsetMask on_set, std::span<const double> score_weights) {
    return argmax_on(channels.size(), on_set, [&](std::size_t i) {
        return weight_at(score_weights, i) * whittle_index(state.aoi[i], channels[i]);
    });
}

Decision randomized_select(const OperatingPoint& point, SubsetMask on_set, double u) {
    double total = 0.0;
    std::optional<std::size_t> last;
    for (std::size_t i = 0; i < point.size(); ++i) {
        if (is_on(on_set, i)) {
            total += point.mu[i];
            last = i;
        }
    }
    if (!last) {
        return {};
    }
    if (!(total > 0.0)) {
        throw DomainError("randomized_select: every ON client has zero rate");
    }
    double cumulative = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) {
        if (!is_on(on_set, i)) {
            continue;
        }
        cumulative += point.mu[i] / total;
        if (u < cumulative) {
            return {i};
        }
    }
    return {last};
}

Decision maxweight_select(const SchedulerState& state, std::span<const UpdateModel> updates,
                          const OperatingPoint& point, SubsetMask on_set,
                          std::span<const double> score_weights) {
    for (double m : point.mu) {
        if (!(m > 0.0)) {
            throw DomainError(fmt::format("maxweight_select: rate must be positive, got {}", m));
        }
    }
    return argmax_on(updates.size(), on_set, [&](std::size_t i) {
        return weight_at(score_weights, i) * (state.aoi[i] - 1.0 / updates[i].lambda()) /
               point.mu[i];
    });
}

Scheduler::Scheduler(PolicyKind kind, std::vector<ChannelParams> channels,
                     std::vector<UpdateModel> updates, std::optional<OperatingPoint> point,
                     Options options)
    : kind_(kind), channels_(std::move(channels)), updates_(std::move(updates)),
      point_(std::move(point)) {
    if (channels_.size() != updates_.size()) {
        throw DimensionMismatch("Scheduler: channel and update lists differ in size");
    }
    if (kind_ != PolicyKind::kWhittle) {
        if (!point_) {
            throw ConfigError(
                fmt::format("policy '{}' needs an operating point", to_string(kind_)));
        }
        if (point_->mu.size() != channels_.size() || point_->sigma2.size() != channels_.size()) {
            throw DimensionMismatch("Scheduler: operating point does not match client count");
        }
    }
    if (kind_ == PolicyKind::kVwd) {
        for (double s2 : point_->sigma2) {
            if (!(s2 > 0.0)) {
                throw DomainError("vwd needs sigma2 > 0 for every client");
            }
        }
    }
    if (kind_ == PolicyKind::kMaxWeight) {
        for (double m : point_->mu) {
            if (!(m > 0.0)) {
                throw DomainError("maxweight needs mu > 0 for every client");
            }
        }
    }
    if (options.weight_baselines) {
        for (const auto& u : updates_) {
            score_weights_.push_back(u.weight());
        }
    }
}

Decision Scheduler::select(const SchedulerState& state, SubsetMask on_set, double u) const {
    switch (kind_) {
    case PolicyKind::kVwd:
        return vwd_select(state, *point_, on_set);
    case PolicyKind::kWhittle:
        return whittle_select(state, channels_, on_set, score_weights_);
    case PolicyKind::kRandomized:
        return randomized_select(*point_, on_set, u);
    case PolicyKind::kMaxWeight:
        return maxweight_select(state, updates_, *point_, on_set, score_weights_);
    }
    return {};
}

} // namespace sosched
