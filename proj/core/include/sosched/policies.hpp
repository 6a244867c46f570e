#pragma once

// Per-slot scheduling rules. Every rule is work-conserving: it returns a
// client whenever the ON set is non-empty. Ties go to the lowest index.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sosched/aoi.hpp"
#include "sosched/capacity.hpp"
#include "sosched/channel.hpp"

namespace sosched {

enum class PolicyKind { kVwd, kWhittle, kRandomized, kMaxWeight };

/// "vwd" | "whittle" | "randomized" | "maxweight"; throws ConfigError otherwise.
PolicyKind parse_policy(std::string_view name);
std::string_view to_string(PolicyKind kind) noexcept;

struct SchedulerState {
    /// d_i = t mu_i - deliveries_i so far.
    std::vector<double> deficits;
    /// AP-side age at the end of the previous slot.
    std::vector<double> aoi;
    /// Number of completed slots.
    std::uint64_t slot = 0;

    static SchedulerState initial(std::size_t n_clients);
};

struct Decision {
    std::optional<std::size_t> scheduled;

    friend bool operator==(const Decision&, const Decision&) = default;
};

/// argmax over ON clients of d_i / sqrt(sigma2_i). Throws DomainError if any
/// sigma2_i <= 0.
Decision vwd_select(const SchedulerState& state, const OperatingPoint& point, SubsetMask on_set);

/// Advances every deficit by mu_i and charges one unit to a scheduled client
/// whose transmission was delivered.
void update_deficits(SchedulerState& state, const OperatingPoint& point, const Decision& decision,
                     bool delivered);

/// Whittle index A^2/2 - A/2 + A / (q/(p+q)) on the AP-side age A.
double whittle_index(double aoi, const ChannelParams& params) noexcept;

Decision whittle_select(const SchedulerState& state, std::span<const ChannelParams> channels,
                        SubsetMask on_set, std::span<const double> score_weights = {});

/// Picks ON client i with probability mu_i / sum_{j ON} mu_j by inverse CDF
/// of `u` over clients in index order.
Decision randomized_select(const OperatingPoint& point, SubsetMask on_set, double u);

/// argmax over ON clients of (AoI_i - 1/lambda_i) / mu_i.
Decision maxweight_select(const SchedulerState& state, std::span<const UpdateModel> updates,
                          const OperatingPoint& point, SubsetMask on_set,
                          std::span<const double> score_weights = {});

/// Binds a policy to its fixed inputs.
class Scheduler {
public:
    struct Options {
        /// Multiply Whittle and max-weight scores by the AoI weights.
        bool weight_baselines = false;
    };

    Scheduler(PolicyKind kind, std::vector<ChannelParams> channels,
              std::vector<UpdateModel> updates, std::optional<OperatingPoint> point,
              Options options);
    Scheduler(PolicyKind kind, std::vector<ChannelParams> channels,
              std::vector<UpdateModel> updates, std::optional<OperatingPoint> point)
        : Scheduler(kind, std::move(channels), std::move(updates), std::move(point), Options{}) {}

    PolicyKind kind() const noexcept { return kind_; }
    bool needs_uniform() const noexcept { return kind_ == PolicyKind::kRandomized; }

    Decision select(const SchedulerState& state, SubsetMask on_set, double u) const;

private:
    PolicyKind kind_;
    std::vector<ChannelParams> channels_;
    std::vector<UpdateModel> updates_;
    std::optional<OperatingPoint> point_;
    std::vector<double> score_weights_;
};

} // namespace sosched
