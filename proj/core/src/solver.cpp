#include "sosched/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "sosched/error.hpp"
#include "sosched/rng.hpp"

namespace sosched {

namespace {

std::vector<double> weights_of(std::span<const UpdateModel> models) {
    std::vector<double> w;
    w.reserve(models.size());
    for (const auto& m : models) {
        w.push_back(m.weight());
    }
    return w;
}

void check_models(const SecondOrderStats& stats, std::span<const UpdateModel> models) {
    if (models.size() != stats.n_clients()) {
        throw DimensionMismatch(fmt::format("{} update models for {} clients", models.size(),
                                            stats.n_clients()));
    }
}

double total(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

/// Feasible set of the descent: equality slice, per-client floor and the
/// delta-tightened proper-subset bounds.
class Region {
public:
    Region(const SecondOrderStats& stats, const SolverConfig& config)
        : stats_(stats), config_(config), total_(stats.full().mean) {}

    double total_rate() const noexcept { return total_; }

    /// Moves `mu` into the region: floor and equality first, then the most
    /// violated subset is scaled down onto its bound with the excess handed to
    /// the complement in proportion to current rates. Returns false if the
    /// repair does not settle within the iteration budget.
    bool repair(std::vector<double>& mu) const {
        // Aim a hair inside the bound so rounding in the redistribution never
        // leaves a proper subset at slack delta - 1e-16.
        const double accept = config_.delta + 1e-12;
        for (int it = 0; it < config_.max_repair_iters; ++it) {
            if (!fix_floor_and_total(mu)) {
                return false;
            }
            if (mu.size() < 2) {
                return true;
            }
            const SubsetSlack worst = most_violated_subset(stats_, mu);
            if (worst.slack >= accept) {
                return true;
            }
            const double target = stats_.mean(worst.subset) - config_.delta - 2e-12;
            double inside = 0.0;
            double outside = 0.0;
            for (std::size_t i = 0; i < mu.size(); ++i) {
                (in(worst.subset, i) ? inside : outside) += mu[i];
            }
            if (target <= 0.0 || outside <= 0.0) {
                return false;
            }
            const double scale = target / inside;
            const double excess = inside - target;
            for (std::size_t i = 0; i < mu.size(); ++i) {
                if (in(worst.subset, i)) {
                    mu[i] *= scale;
                } else {
                    mu[i] += excess * mu[i] / outside;
                }
            }
        }
        return fix_floor_and_total(mu) &&
               (mu.size() < 2 || most_violated_subset(stats_, mu).slack >= accept);
    }

private:
    static bool in(SubsetMask s, std::size_t i) { return (s >> i) & 1U; }

    bool fix_floor_and_total(std::vector<double>& mu) const {
        const double floor = config_.mu_floor;
        for (double& x : mu) {
            x = std::max(x, floor);
        }
        const double diff = total(mu) - total_;
        if (diff > 0.0) {
            double reducible = 0.0;
            for (double x : mu) {
                reducible += x - floor;
            }
            if (reducible < diff) {
                return false;
            }
            for (double& x : mu) {
                x -= diff * (x - floor) / reducible;
            }
        } else if (diff < 0.0) {
            const double sum = total(mu);
            for (double& x : mu) {
                x -= diff * x / sum;
            }
        }
        return true;
    }

    const SecondOrderStats& stats_;
    const SolverConfig& config_;
    double total_;
};

struct Descent {
    std::vector<double> mu;
    double objective;
    int iterations;
    bool converged;
    std::vector<double> history;
};

Descent descend(std::vector<double> mu, const Region& region, double total_sd,
                std::span<const UpdateModel> models, const SolverConfig& config) {
    const double min_step = 1e-14;
    double step = config.step_size * region.total_rate();
    double f = reduced_total_aoi(mu, total_sd, models);
    const std::size_t n = mu.size();
    std::vector<double> history{f};
    if (n < 2) {
        return {std::move(mu), f, 0, true, std::move(history)};
    }
    int it = 0;
    for (; it < config.max_iters; ++it) {
        auto g = reduced_total_aoi_gradient(mu, total_sd, models);
        const double mean_g = total(g) / static_cast<double>(n);
        double norm = 0.0;
        for (double& x : g) {
            x -= mean_g;
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            return {std::move(mu), f, it, true, std::move(history)};
        }
        bool accepted = false;
        while (step >= min_step) {
            std::vector<double> cand(n);
            for (std::size_t i = 0; i < n; ++i) {
                cand[i] = mu[i] - step * g[i] / norm;
            }
            if (region.repair(cand)) {
                const double fc = reduced_total_aoi(cand, total_sd, models);
                if (fc < f) {
                    const double gain = f - fc;
                    mu = std::move(cand);
                    f = fc;
                    history.push_back(f);
                    accepted = true;
                    step = std::min(step * 1.5, region.total_rate());
                    if (gain < config.tolerance) {
                        return {std::move(mu), f, it + 1, true, std::move(history)};
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No descent direction survives the repair: a constrained
            // stationary point up to step resolution.
            return {std::move(mu), f, it + 1, true, std::move(history)};
        }
    }
    return {std::move(mu), f, it, false, std::move(history)};
}

SolveResult finish(const SecondOrderStats& stats, std::span<const UpdateModel> models,
                   std::vector<double> mu, double delta, int iterations, bool converged) {
    const double total_sd = std::sqrt(stats.full().variance);
    SolveResult result;
    result.point.sigma2 = sigma_allocation(mu, total_sd, weights_of(models));
    result.point.mu = std::move(mu);
    result.objective = theoretical_total_aoi(result.point, models);
    result.iterations = iterations;
    result.converged = converged;
    if (stats.n_clients() >= 2) {
        for (const auto& s : subsets_with_slack_at_most(stats, result.point.mu, 10.0 * delta)) {
            result.binding_subsets.push_back(s.subset);
        }
    }
    return result;
}

} // namespace

double theoretical_total_aoi(const OperatingPoint& point, std::span<const UpdateModel> models) {
    if (point.mu.size() != models.size() || point.sigma2.size() != models.size()) {
        throw DimensionMismatch("theoretical_total_aoi: point and update models differ in size");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        sum += models[i].weight() * aoi_approx(point.mu[i], point.sigma2[i], models[i].lambda());
    }
    return sum;
}

std::vector<double> sigma_allocation(std::span<const double> mu, double total_sd,
                                     std::span<const double> weights) {
    if (mu.size() != weights.size()) {
        throw DimensionMismatch("sigma_allocation: rates and weights differ in size");
    }
    if (!(total_sd > 0.0)) {
        throw DomainError(fmt::format("sigma_allocation: budget must be positive, got {}",
                                      total_sd));
    }
    std::vector<double> share(mu.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(mu[i] > 0.0)) {
            throw DomainError(fmt::format("sigma_allocation: rate {} is not positive", mu[i]));
        }
        if (!(weights[i] > 0.0)) {
            throw DomainError(fmt::format("sigma_allocation: weight {} is not positive",
                                          weights[i]));
        }
        share[i] = mu[i] * mu[i] / weights[i];
        denom += share[i];
    }
    std::vector<double> sigma2(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double sd = total_sd * share[i] / denom;
        sigma2[i] = sd * sd;
    }
    return sigma2;
}

double reduced_total_aoi(std::span<const double> mu, double total_sd,
                         std::span<const UpdateModel> models) {
    OperatingPoint point{{mu.begin(), mu.end()}, sigma_allocation(mu, total_sd, weights_of(models))};
    return theoretical_total_aoi(point, models);
}

std::vector<double> reduced_total_aoi_gradient(std::span<const double> mu, double total_sd,
                                               std::span<const UpdateModel> models) {
    if (mu.size() != models.size()) {
        throw DimensionMismatch("reduced_total_aoi_gradient: size mismatch");
    }
    // With sigma eliminated the objective is
    //   V^2 / (2 W) + sum_i alpha_i / (2 mu_i) + const,  W = sum_j mu_j^2 / alpha_j.
    double w = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        w += mu[i] * mu[i] / models[i].weight();
    }
    const double v2 = total_sd * total_sd;
    std::vector<double> g(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double a = models[i].weight();
        g[i] = -v2 * mu[i] / (a * w * w) - a / (2.0 * mu[i] * mu[i]);
    }
    return g;
}

std::vector<double> proportional_point(const SecondOrderStats& stats) {
    std::vector<double> mu(stats.n_clients());
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        mu[i] = 1.0 - stats.off_probs()[i];
        sum += mu[i];
    }
    for (double& x : mu) {
        x *= stats.full().mean / sum;
    }
    return mu;
}

SolveResult solve_operating_point(const SecondOrderStats& stats,
                                  std::span<const UpdateModel> models,
                                  const SolverConfig& config) {
    check_models(stats, models);
    if (!(config.delta > 0.0)) {
        throw DomainError("solver delta must be positive");
    }
    if (!(config.tolerance > 0.0)) {
        throw DomainError("solver tolerance must be positive");
    }
    if (config.starts < 1 || config.max_iters < 1) {
        throw DomainError("solver needs at least one start and one iteration");
    }
    const double total_sd = std::sqrt(stats.full().variance);
    if (!(total_sd > 0.0)) {
        throw InfeasibleRegion("the full-set channel variance is zero; no sigma2 > 0 point");
    }

    const auto start = proportional_point(stats);
    {
        OperatingPoint probe{start, sigma_allocation(start, total_sd, weights_of(models))};
        const auto report = check_inner(stats, probe, config.delta);
        if (!report.feasible) {
            throw InfeasibleRegion(fmt::format(
                "proportional point violates {} inner-bound constraint(s) at delta={}; first: "
                "{} on subset {:#x} (slack {})",
                report.violations.size(), config.delta,
                to_string(report.violations.front().constraint),
                report.violations.front().subset, report.violations.front().slack));
        }
    }

    const Region region(stats, config);
    std::optional<Descent> best;
    int total_iters = 0;
    for (int s = 0; s < config.starts; ++s) {
        std::vector<double> mu = start;
        if (s > 0) {
            Engine engine = make_stream(config.seed, static_cast<std::uint64_t>(s), 0,
                                        StreamKind::kSolver);
            std::vector<double> w(mu.size());
            double wsum = 0.0;
            for (double& x : w) {
                x = -std::log(1.0 - uniform01(engine));
                wsum += x;
            }
            for (std::size_t i = 0; i < mu.size(); ++i) {
                mu[i] = 0.5 * start[i] + 0.5 * region.total_rate() * w[i] / wsum;
            }
            if (!region.repair(mu)) {
                continue;
            }
        }
        Descent d = descend(std::move(mu), region, total_sd, models, config);
        total_iters += d.iterations;
        if (!best || d.objective < best->objective) {
            best = std::move(d);
        }
    }
    SolveResult result = finish(stats, models, std::move(best->mu), config.delta, total_iters,
                                best->converged);
    result.objective_history = std::move(best->history);
    if (!check_inner(stats, result.point, config.delta).feasible) {
        throw NumericalInconsistency("solver output left the inner region");
    }
    return result;
}

SolveResult brute_force_oracle(const SecondOrderStats& stats,
                               std::span<const UpdateModel> models, double delta,
                               double grid_resolution) {
    check_models(stats, models);
    const std::size_t n = stats.n_clients();
    if (n > 3) {
        throw TooManyClients(fmt::format("brute_force_oracle handles N <= 3, got {}", n));
    }
    if (!(grid_resolution > 0.0) || !(delta > 0.0)) {
        throw DomainError("brute_force_oracle: grid_resolution and delta must be positive");
    }
    const double total_rate = stats.full().mean;
    const double total_sd = std::sqrt(stats.full().variance);
    const auto weights = weights_of(models);

    std::optional<SolveResult> best;
    int evaluated = 0;
    auto consider = [&](std::vector<double> mu) {
        for (double x : mu) {
            if (!(x > 0.0)) {
                return;
            }
        }
        ++evaluated;
        OperatingPoint point{mu, sigma_allocation(mu, total_sd, weights)};
        if (!check_inner(stats, point, delta).feasible) {
            return;
        }
        const double f = theoretical_total_aoi(point, models);
        if (!best || f < best->objective) {
            best = finish(stats, models, std::move(mu), delta, 0, true);
        }
    };

    if (n == 1) {
        consider({total_rate});
    } else {
        const auto steps = static_cast<long>(std::floor(total_rate / grid_resolution));
        for (long a = 1; a <= steps; ++a) {
            const double mu0 = static_cast<double>(a) * grid_resolution;
            if (n == 2) {
                consider({mu0, total_rate - mu0});
                continue;
            }
            for (long b = 1; a + b <= steps; ++b) {
                const double mu1 = static_cast<double>(b) * grid_resolution;
                consider({mu0, mu1, total_rate - mu0 - mu1});
            }
        }
    }
    if (!best) {
        throw InfeasibleRegion("brute_force_oracle: no inner-feasible grid point");
    }
    best->iterations = evaluated;
    return *best;
}

} // namespace sosched
