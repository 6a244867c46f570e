#include "sosched/cli/commands.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sosched/capacity.hpp"
#include "sosched/error.hpp"

namespace sosched::cli {

namespace {

using nlohmann::json;

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write '{}'", (dir / name).string()));
    }
    return out;
}

void write_json(const json& j, const std::filesystem::path& dir, const std::string& name) {
    auto out = open_output(dir, name);
    out << j.dump(2) << '\n';
}

std::vector<ChannelParams> channels_of(const std::vector<ClientConfig>& clients) {
    std::vector<ChannelParams> out;
    for (const auto& c : clients) {
        out.push_back(c.channel);
    }
    return out;
}

std::vector<UpdateModel> updates_of(const std::vector<ClientConfig>& clients) {
    std::vector<UpdateModel> out;
    for (const auto& c : clients) {
        out.push_back(c.update);
    }
    return out;
}

json subsets_json(const std::vector<SubsetMask>& subsets) {
    json arr = json::array();
    for (SubsetMask s : subsets) {
        arr.push_back(s);
    }
    return arr;
}

} // namespace

std::string format_number(double x) { return fmt::format("{:.9g}", x); }

SimConfig sim_config_for(const ExperimentConfig& config, std::vector<ClientConfig> clients,
                         PolicyKind policy, std::optional<OperatingPoint> point) {
    SimConfig s;
    s.clients = std::move(clients);
    s.horizon = config.horizon;
    s.runs = config.runs;
    s.seed = config.seed;
    s.checkpoints = config.checkpoints;
    s.warmup = config.warmup;
    s.policy = policy;
    s.point = std::move(point);
    s.weight_baselines = config.weight_baselines;
    s.threads = config.threads;
    return s;
}

std::vector<ValidateRow> run_validate(const ExperimentConfig& config) {
    std::vector<ValidateRow> rows;
    std::uint64_t salt = 0;
    for (double q : config.validate.q) {
        for (double lambda : config.validate.lambda) {
            for (double p : config.validate.p) {
                ChannelParams channel(p, q);
                UpdateModel update(lambda, 1.0);
                const SecondOrderStats stats({channel}, config.truncation);
                const double theory =
                    aoi_approx(stats.full().mean, stats.full().variance, lambda);
                // With one client Whittle serves it in every ON slot.
                SimConfig sim = sim_config_for(config, {{channel, update}}, PolicyKind::kWhittle,
                                               std::nullopt);
                sim.checkpoints = {config.horizon};
                sim.trace_salt = salt++;
                const BatchMetrics batch = run_batch(sim);
                rows.push_back({p, q, lambda, theory, batch.aoi_mean[0],
                                std::abs(theory - batch.aoi_mean[0]), batch.aoi_stderr[0]});
            }
        }
    }
    return rows;
}

void write_validate(const std::vector<ValidateRow>& rows, const std::filesystem::path& dir) {
    auto out = open_output(dir, "validate.csv");
    out << "p,q,lambda,theoretical_aoi,empirical_aoi,abs_diff,stderr\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{}\n", format_number(r.p), format_number(r.q),
                           format_number(r.lambda), format_number(r.theoretical_aoi),
                           format_number(r.empirical_aoi), format_number(r.abs_diff),
                           format_number(r.stderr_aoi));
    }
}

std::vector<StatsRow> run_stats(const ExperimentConfig& config, bool simulate) {
    const auto clients = resolve_clients(config);
    const auto channels = channels_of(clients);
    const SecondOrderStats stats(channels, config.truncation);
    const auto table = stats.materialize();
    std::vector<StatsRow> rows;
    for (const auto& [mask, s] : table) {
        bool monotone = true;
        for (std::size_t i = 0; i < channels.size(); ++i) {
            const SubsetMask bigger = mask | (SubsetMask{1} << i);
            if (bigger != mask && table.at(bigger).mean < s.mean) {
                monotone = false;
            }
        }
        StatsRow row{mask, s.mean, s.variance, monotone, std::nullopt};
        if (simulate) {
            row.empirical = estimate_subset_stats(channels, mask, config.horizon, config.runs,
                                                  config.seed);
        }
        rows.push_back(row);
    }
    return rows;
}

void write_stats(const std::vector<StatsRow>& rows, const std::filesystem::path& dir) {
    const bool empirical = !rows.empty() && rows.front().empirical.has_value();
    auto out = open_output(dir, "stats.csv");
    out << "subset,mean,variance,monotone";
    if (empirical) {
        out << ",empirical_mean,mean_stderr,empirical_variance,variance_stderr";
    }
    out << '\n';
    json arr = json::array();
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{}", r.subset, format_number(r.mean),
                           format_number(r.variance), r.monotone ? 1 : 0);
        json j{{"subset", r.subset},
               {"mean", r.mean},
               {"variance", r.variance},
               {"monotone", r.monotone}};
        if (r.empirical) {
            const auto& e = *r.empirical;
            out << fmt::format(",{},{},{},{}", format_number(e.mean), format_number(e.mean_stderr),
                               format_number(e.variance), format_number(e.variance_stderr));
            j["empirical_mean"] = e.mean;
            j["mean_stderr"] = e.mean_stderr;
            j["empirical_variance"] = e.variance;
            j["variance_stderr"] = e.variance_stderr;
        }
        out << '\n';
        arr.push_back(std::move(j));
    }
    write_json(json{{"subsets", std::move(arr)}}, dir, "stats.json");
}

SolveResult run_solve(const ExperimentConfig& config) {
    const auto clients = resolve_clients(config);
    const SecondOrderStats stats(channels_of(clients), config.truncation);
    const auto updates = updates_of(clients);
    SolveResult result = solve_operating_point(stats, updates, config.solver);
    const auto report = check_inner(stats, result.point, config.solver.delta);
    if (!report.feasible) {
        const auto& v = report.violations.front();
        throw InfeasibleRegion(fmt::format("solver point fails the inner bound: {} on subset {} "
                                           "(slack {})",
                                           to_string(v.constraint), v.subset, v.slack));
    }
    return result;
}

void write_solve(const SolveResult& result, const std::filesystem::path& dir) {
    write_json(json{{"mu", result.point.mu},
                    {"sigma2", result.point.sigma2},
                    {"objective", result.objective},
                    {"binding_subsets", subsets_json(result.binding_subsets)},
                    {"iterations", result.iterations},
                    {"converged", result.converged}},
               dir, "solve.json");
}

SolveResult operating_point_for(const ExperimentConfig& config,
                                const std::vector<ClientConfig>& clients) {
    if (!config.point) {
        ExperimentConfig copy = config;
        copy.clients = clients;
        copy.instance.reset();
        return run_solve(copy);
    }
    SolveResult r;
    r.point = *config.point;
    r.objective = theoretical_total_aoi(r.point, updates_of(clients));
    return r;
}

SimulateResult run_simulate(const ExperimentConfig& config) {
    SimulateResult r;
    r.clients = resolve_clients(config);
    r.point = operating_point_for(config, r.clients).point;
    for (std::size_t i = 0; i < r.clients.size(); ++i) {
        r.theoretical_aoi.push_back(
            aoi_approx(r.point.mu[i], r.point.sigma2[i], r.clients[i].update.lambda()));
    }
    r.policy = config.policy;
    r.batch = run_batch(sim_config_for(config, r.clients, config.policy, r.point));
    return r;
}

namespace {

void write_convergence(const std::vector<ClientConfig>& clients, const OperatingPoint& point,
                       const BatchMetrics& batch, std::ostream& out) {
    out << "client,t,empirical_mean,target_mean,empirical_variance,target_variance\n";
    for (std::size_t i = 0; i < clients.size(); ++i) {
        for (std::size_t k = 0; k < batch.checkpoints.size(); ++k) {
            out << fmt::format("{},{},{},{},{},{}\n", i, batch.checkpoints[k],
                               format_number(batch.mean[i][k]), format_number(point.mu[i]),
                               format_number(batch.variance[i][k]),
                               format_number(point.sigma2[i]));
        }
    }
}

} // namespace

void write_simulate(const SimulateResult& r, const std::filesystem::path& dir) {
    const auto& b = r.batch;
    const std::size_t last = b.checkpoints.size() - 1;
    {
        auto out = open_output(dir, "simulate.csv");
        out << "client,target_mean,target_variance,empirical_mean,mean_stderr,"
               "empirical_variance,variance_stderr,aoi_mean,aoi_stderr,theoretical_aoi\n";
        for (std::size_t i = 0; i < r.clients.size(); ++i) {
            out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", i, format_number(r.point.mu[i]),
                               format_number(r.point.sigma2[i]), format_number(b.mean[i][last]),
                               format_number(b.mean_stderr[i][last]),
                               format_number(b.variance[i][last]),
                               format_number(b.variance_stderr[i][last]),
                               format_number(b.aoi_mean[i]), format_number(b.aoi_stderr[i]),
                               format_number(r.theoretical_aoi[i]));
        }
    }
    {
        auto out = open_output(dir, "convergence.csv");
        write_convergence(r.clients, r.point, b, out);
    }
    double theory = 0.0;
    for (std::size_t i = 0; i < r.clients.size(); ++i) {
        theory += r.clients[i].update.weight() * r.theoretical_aoi[i];
    }
    write_json(json{{"policy", std::string(to_string(r.policy))},
                    {"n_clients", r.clients.size()},
                    {"runs", b.runs},
                    {"horizon", b.checkpoints.back()},
                    {"total_aoi_mean", b.weighted_total_aoi_mean},
                    {"total_aoi_stderr", b.weighted_total_aoi_stderr},
                    {"theoretical_aoi", theory},
                    {"total_empirical_variance", b.total_variance.back()},
                    {"max_rel_deficit_median", b.max_rel_deficit_median.back()}},
               dir, "simulate.json");
}

CompareResult run_compare(const ExperimentConfig& config) {
    if (config.compare.policies.empty()) {
        throw ConfigError("compare: policy list is empty");
    }
    CompareResult r;
    r.clients = resolve_clients(config);
    r.solution = operating_point_for(config, r.clients);
    std::uint64_t salt = 0;
    for (PolicyKind policy : config.compare.policies) {
        SimConfig sim = sim_config_for(config, r.clients, policy, r.solution.point);
        sim.trace_salt = config.compare.independent_traces ? ++salt : 0;
        r.batches.emplace_back(policy, run_batch(sim));
    }
    return r;
}

void write_compare(const CompareResult& r, const std::filesystem::path& dir) {
    {
        auto out = open_output(dir, "compare_aoi.csv");
        out << "policy,n_clients,total_aoi_mean,total_aoi_stderr,theoretical_aoi\n";
        for (const auto& [policy, b] : r.batches) {
            out << fmt::format("{},{},{},{},{}\n", to_string(policy), r.clients.size(),
                               format_number(b.weighted_total_aoi_mean),
                               format_number(b.weighted_total_aoi_stderr),
                               format_number(r.solution.objective));
        }
    }
    {
        auto out = open_output(dir, "variance_traj.csv");
        out << "policy,t,total_empirical_variance\n";
        for (const auto& [policy, b] : r.batches) {
            for (std::size_t k = 0; k < b.checkpoints.size(); ++k) {
                out << fmt::format("{},{},{}\n", to_string(policy), b.checkpoints[k],
                                   format_number(b.total_variance[k]));
            }
        }
    }
    auto out = open_output(dir, "convergence.csv");
    for (const auto& [policy, b] : r.batches) {
        if (policy == PolicyKind::kVwd) {
            write_convergence(r.clients, r.solution.point, b, out);
            return;
        }
    }
    out << "client,t,empirical_mean,target_mean,empirical_variance,target_variance\n";
}

} // namespace sosched::cli
