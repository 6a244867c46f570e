// sosched: second-order AoI scheduling experiments.

#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sosched/cli/commands.hpp"
#include "sosched/error.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kUnexpected = 1,
    kConfig = 2,
    kInfeasible = 3,
    kNumerical = 4,
};

struct Overrides {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> runs;
    std::optional<std::uint64_t> horizon;
    std::optional<unsigned> threads;
    std::optional<std::string> policy;
    bool simulate = false;
    bool independent_traces = false;
};

sosched::cli::ExperimentConfig load(const Overrides& o) {
    auto c = sosched::cli::load_config(o.config);
    if (o.out) {
        c.out = *o.out;
    }
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (o.runs) {
        c.runs = *o.runs;
    }
    if (o.horizon) {
        c.horizon = *o.horizon;
    }
    if (o.threads) {
        c.threads = *o.threads;
    }
    if (o.policy) {
        c.policy = sosched::parse_policy(*o.policy);
        c.compare.policies = {c.policy};
    }
    if (o.simulate) {
        c.stats_simulate = true;
    }
    if (o.independent_traces) {
        c.compare.independent_traces = true;
    }
    if (c.runs == 0 || c.horizon == 0) {
        throw sosched::ConfigError("runs and horizon must be >= 1");
    }
    return c;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "experiment JSON")->required();
    cmd->add_option("--out", o.out, "output directory (default ./out)");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--runs", o.runs, "independent runs R");
    cmd->add_option("--horizon", o.horizon, "slots per run T");
    cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

int run(const std::function<void()>& body) {
    try {
        body();
        return kOk;
    } catch (const sosched::InfeasibleRegion& e) {
        fmt::print(stderr, "infeasible: {}\n", e.what());
        return kInfeasible;
    } catch (const sosched::NumericalInconsistency& e) {
        fmt::print(stderr, "numerical inconsistency: {}\n", e.what());
        return kNumerical;
    } catch (const sosched::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const sosched::DomainError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const sosched::TooManyClients& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const sosched::DimensionMismatch& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUnexpected;
    }
}

} // namespace

int main(int argc, char** argv) {
    namespace cli = sosched::cli;
    CLI::App app{"Second-order AoI scheduling over Gilbert-Elliott channels"};
    app.require_subcommand(1);
    Overrides o;

    auto* validate = app.add_subcommand("validate", "single-client theory vs simulation grid");
    auto* stats = app.add_subcommand("stats", "subset mean/variance table");
    auto* solve = app.add_subcommand("solve", "AoI-optimal operating point");
    auto* simulate = app.add_subcommand("simulate", "one policy on one instance");
    auto* compare = app.add_subcommand("compare", "all policies on one instance");
    for (auto* cmd : {validate, stats, solve, simulate, compare}) {
        add_common(cmd, o);
    }
    stats->add_flag("--simulate", o.simulate, "add Monte Carlo columns");
    simulate->add_option("--policy", o.policy, "vwd | whittle | randomized | maxweight");
    compare->add_option("--policy", o.policy, "restrict the comparison to one policy");
    compare->add_flag("--independent-traces", o.independent_traces,
                      "resample channel and arrival traces per policy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    return run([&] {
        const auto config = load(o);
        if (validate->parsed()) {
            cli::write_validate(cli::run_validate(config), config.out);
        } else if (stats->parsed()) {
            cli::write_stats(cli::run_stats(config, config.stats_simulate), config.out);
        } else if (solve->parsed()) {
            cli::write_solve(cli::run_solve(config), config.out);
        } else if (simulate->parsed()) {
            cli::write_simulate(cli::run_simulate(config), config.out);
        } else if (compare->parsed()) {
            cli::write_compare(cli::run_compare(config), config.out);
        }
    });
}
