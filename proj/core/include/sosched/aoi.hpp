#pragma once

// Age-of-information performance model.
//
// Time convention: slot t covers (t-1, t]. An update generated during slot t
// carries timestamp t-1, and AoI is sampled at the end of the slot as
// t - (timestamp of the freshest delivered update). A packet generated and
// delivered in the same slot therefore has age 1, and a delivery gap of B
// slots contributes ages 1..B, matching the renewal formula below.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sosched {

/// Bernoulli update generation with per-slot probability `lambda` and AoI
/// weight `weight`.
class UpdateModel {
public:
    UpdateModel(double lambda, double weight = 1.0);

    double lambda() const noexcept { return lambda_; }
    double weight() const noexcept { return weight_; }

private:
    double lambda_;
    double weight_;
};

struct HittingMoments {
    double first = 0.0;
    double second = 0.0;
};

/// Moments of the time a Brownian motion with drift mu and variance sigma2
/// takes to climb by one unit: IG(1/mu, 1/sigma2).
HittingMoments ig_moments(double mu, double sigma2);

/// Time-average AoI of a delivery process with second-order model
/// (mu, sigma2) and Bernoulli(lambda) updates:
///   (sigma2/mu^2 + 1/mu)/2 + 1/lambda - 1/2.
double aoi_approx(double mu, double sigma2, double lambda);

/// d aoi_approx / d mu and d aoi_approx / d sigma2.
double aoi_approx_dmu(double mu, double sigma2);
double aoi_approx_dsigma2(double mu);

/// Renewal estimate from observed inter-delivery gaps:
///   sum B^2 / (2 sum B) + 1/lambda - 1/2.
double empirical_aoi_renewal(std::span<const double> interdelivery, double lambda);

/// One inverse-Gaussian draw, mean `mean` and shape `shape`
/// (Michael-Schucany-Haas transformation).
double sample_inverse_gaussian(double mean, double shape, double normal_draw, double uniform_draw);

struct ReferenceSamples {
    /// Continuous first-hitting times.
    std::vector<double> raw;
    /// Slot-rounded gaps, ceil(raw) and at least 1.
    std::vector<double> slots;
};

/// Inter-delivery gaps of the second-order reference delivery process:
/// i.i.d. IG(1/mu, 1/sigma2) hitting times rounded up to whole slots.
ReferenceSamples reference_delivery_sampler(double mu, double sigma2, std::size_t n_samples,
                                            std::uint64_t seed);

/// Time-average AoI over slots 1..horizon given the slots in which updates
/// were generated and the slots in which the client was served. Both lists
/// are 1-based and sorted. Slots up to `warmup` are excluded from the
/// average. Initially the sensor and the AP both hold an update stamped 0.
double trace_time_average_aoi(std::span<const std::uint64_t> delivery_slots,
                              std::span<const std::uint64_t> generation_slots,
                              std::uint64_t horizon, std::uint64_t warmup = 0);

} // namespace sosched
