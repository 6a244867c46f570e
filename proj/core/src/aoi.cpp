#include "sosched/aoi.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "sosched/error.hpp"
#include "sosched/rng.hpp"

namespace sosched {

namespace {

// Raw hitting times within this distance above an integer round down to it,
// so a zero-variance process yields exactly 1/mu slots.
constexpr double kCeilSlack = 1e-9;

void require_rate(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw DomainError(fmt::format("delivery rate must be positive, got {}", mu));
    }
}

void require_lambda(double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw DomainError(fmt::format("update probability must lie in (0, 1], got {}", lambda));
    }
}

} // namespace

UpdateModel::UpdateModel(double lambda, double weight) : lambda_(lambda), weight_(weight) {
    require_lambda(lambda);
    if (!(weight > 0.0) || !std::isfinite(weight)) {
        throw DomainError(fmt::format("AoI weight must be positive, got {}", weight));
    }
}

HittingMoments ig_moments(double mu, double sigma2) {
    require_rate(mu);
    if (!(sigma2 > 0.0)) {
        throw DomainError(fmt::format("ig_moments: variance must be positive, got {}", sigma2));
    }
    return {1.0 / mu, sigma2 / (mu * mu * mu) + 1.0 / (mu * mu)};
}

double aoi_approx(double mu, double sigma2, double lambda) {
    require_rate(mu);
    require_lambda(lambda);
    if (!(sigma2 >= 0.0)) {
        throw DomainError(fmt::format("aoi_approx: variance must be nonnegative, got {}", sigma2));
    }
    return 0.5 * (sigma2 / (mu * mu) + 1.0 / mu) + 1.0 / lambda - 0.5;
}

double aoi_approx_dmu(double mu, double sigma2) {
    require_rate(mu);
    return -sigma2 / (mu * mu * mu) - 0.5 / (mu * mu);
}

double aoi_approx_dsigma2(double mu) {
    require_rate(mu);
    return 0.5 / (mu * mu);
}

double empirical_aoi_renewal(std::span<const double> interdelivery, double lambda) {
    if (interdelivery.empty()) {
        throw EmptySamples("empirical_aoi_renewal: no inter-delivery samples");
    }
    require_lambda(lambda);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double b : interdelivery) {
        if (!(b >= 1.0)) {
            throw DomainError(fmt::format("inter-delivery time {} is below one slot", b));
        }
        sum += b;
        sum_sq += b * b;
    }
    return sum_sq / (2.0 * sum) + 1.0 / lambda - 0.5;
}

double sample_inverse_gaussian(double mean, double shape, double normal_draw,
                               double uniform_draw) {
    const double y = normal_draw * normal_draw;
    const double my = mean * y;
    const double x =
        mean + mean * my / (2.0 * shape) -
        (mean / (2.0 * shape)) * std::sqrt(4.0 * shape * my + my * my);
    if (uniform_draw * (mean + x) <= mean) {
        return x;
    }
    return mean * mean / x;
}

ReferenceSamples reference_delivery_sampler(double mu, double sigma2, std::size_t n_samples,
                                            std::uint64_t seed) {
    require_rate(mu);
    if (!(sigma2 > 0.0)) {
        throw DomainError(
            fmt::format("reference_delivery_sampler: variance must be positive, got {}", sigma2));
    }
    Engine engine = make_stream(seed, 0, 0, StreamKind::kSampler);
    std::normal_distribution<double> normal;
    const double mean = 1.0 / mu;
    const double shape = 1.0 / sigma2;

    ReferenceSamples out;
    out.raw.reserve(n_samples);
    out.slots.reserve(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        const double z = normal(engine);
        const double u = uniform01(engine);
        const double h = sample_inverse_gaussian(mean, shape, z, u);
        out.raw.push_back(h);
        out.slots.push_back(std::max(1.0, std::ceil(h - kCeilSlack)));
    }
    return out;
}

double trace_time_average_aoi(std::span<const std::uint64_t> delivery_slots,
                              std::span<const std::uint64_t> generation_slots,
                              std::uint64_t horizon, std::uint64_t warmup) {
    if (horizon == 0 || warmup >= horizon) {
        throw DomainError(
            fmt::format("trace_time_average_aoi: need horizon > warmup, got {} and {}", horizon,
                        warmup));
    }
    std::uint64_t sensor_stamp = 0;
    std::uint64_t ap_stamp = 0;
    std::size_t next_gen = 0;
    std::size_t next_delivery = 0;
    double total = 0.0;
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        while (next_gen < generation_slots.size() && generation_slots[next_gen] <= t) {
            sensor_stamp = generation_slots[next_gen] - 1;
            ++next_gen;
        }
        while (next_delivery < delivery_slots.size() && delivery_slots[next_delivery] <= t) {
            if (delivery_slots[next_delivery] == t) {
                ap_stamp = sensor_stamp;
            }
            ++next_delivery;
        }
        if (t > warmup) {
            total += static_cast<double>(t - ap_stamp);
        }
    }
    return total / static_cast<double>(horizon - warmup);
}

} // namespace sosched
