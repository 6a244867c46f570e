#include "sosched/cli/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sosched/error.hpp"
#include "sosched/rng.hpp"

namespace sosched::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
        throw ConfigError(fmt::format("{}: expected an object", where));
    }
    const std::set<std::string_view> keys(allowed);
    for (const auto& [key, value] : j.items()) {
        if (!keys.contains(key)) {
            throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
        }
    }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
    }
}

template <typename T>
void read_opt(const json& j, const std::string& key, const std::string& where, T& out) {
    if (j.contains(key)) {
        out = get<T>(j, key, where);
    }
}

std::uint64_t get_count(const json& j, const std::string& key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(fmt::format("{}.{}: expected a non-negative integer", where, key));
    }
    return v.get<std::uint64_t>();
}

Range read_range(const json& j, const std::string& key, const std::string& where) {
    const auto v = get<std::vector<double>>(j, key, where);
    if (v.size() != 2 || !(v[0] <= v[1])) {
        throw ConfigError(fmt::format("{}.{}: expected [lo, hi] with lo <= hi", where, key));
    }
    return {v[0], v[1]};
}

std::vector<double> read_grid(const json& j, const std::string& key, const std::string& where) {
    auto v = get<std::vector<double>>(j, key, where);
    if (v.empty()) {
        throw ConfigError(fmt::format("{}.{}: grid must be non-empty", where, key));
    }
    return v;
}

ClientConfig read_client(const json& j, const std::string& where) {
    reject_unknown(j, where, {"p", "q", "lambda", "alpha"});
    try {
        const double alpha = j.contains("alpha") ? get<double>(j, "alpha", where) : 1.0;
        return {ChannelParams(get<double>(j, "p", where), get<double>(j, "q", where)),
                UpdateModel(get<double>(j, "lambda", where), alpha)};
    } catch (const DomainError& e) {
        throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
}

InstanceSpec read_instance(const json& j) {
    const std::string where = "instance";
    reject_unknown(j, where,
                   {"n_clients", "seed", "p_range", "q_range", "lambda_range", "weighted",
                    "alpha_range"});
    InstanceSpec s;
    if (j.contains("n_clients")) {
        s.n_clients = get_count(j, "n_clients", where);
    }
    if (j.contains("seed")) {
        s.seed = get_count(j, "seed", where);
    }
    if (j.contains("p_range")) {
        s.p_range = read_range(j, "p_range", where);
    }
    if (j.contains("q_range")) {
        s.q_range = read_range(j, "q_range", where);
    }
    if (j.contains("lambda_range")) {
        s.lambda_range = read_range(j, "lambda_range", where);
    }
    read_opt(j, "weighted", where, s.weighted);
    if (j.contains("alpha_range")) {
        s.alpha_range = read_range(j, "alpha_range", where);
    }
    if (s.n_clients == 0 || s.n_clients > kMaxClients) {
        throw ConfigError(fmt::format("instance.n_clients must be in [1, {}]", kMaxClients));
    }
    return s;
}

SolverConfig read_solver(const json& j) {
    const std::string where = "solver";
    reject_unknown(j, where,
                   {"delta", "max_iters", "step_size", "tolerance", "grid_resolution", "starts",
                    "seed", "mu_floor"});
    SolverConfig s;
    read_opt(j, "delta", where, s.delta);
    read_opt(j, "max_iters", where, s.max_iters);
    read_opt(j, "step_size", where, s.step_size);
    read_opt(j, "tolerance", where, s.tolerance);
    read_opt(j, "grid_resolution", where, s.grid_resolution);
    read_opt(j, "starts", where, s.starts);
    if (j.contains("seed")) {
        s.seed = get_count(j, "seed", where);
    }
    read_opt(j, "mu_floor", where, s.mu_floor);
    if (!(s.delta > 0.0) || !(s.tolerance > 0.0) || !(s.step_size > 0.0) ||
        !(s.grid_resolution > 0.0) || !(s.mu_floor > 0.0) || s.max_iters < 1 || s.starts < 1) {
        throw ConfigError("solver: delta, tolerance, step_size, grid_resolution and mu_floor "
                          "must be positive; max_iters and starts at least 1");
    }
    return s;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    const std::string where = "config";
    reject_unknown(j, where,
                   {"name", "out", "seed", "runs", "horizon", "warmup", "threads", "checkpoints",
                    "policy", "weight_baselines", "clients", "instance", "point", "solver",
                    "truncation", "validate", "compare", "stats"});

    ExperimentConfig c;
    read_opt(j, "name", where, c.name);
    if (j.contains("out")) {
        c.out = get<std::string>(j, "out", where);
    }
    if (j.contains("seed")) {
        c.seed = get_count(j, "seed", where);
    }
    if (j.contains("runs")) {
        c.runs = get_count(j, "runs", where);
    }
    if (j.contains("horizon")) {
        c.horizon = get_count(j, "horizon", where);
    }
    if (j.contains("warmup")) {
        c.warmup = get_count(j, "warmup", where);
    }
    if (j.contains("threads")) {
        c.threads = static_cast<unsigned>(get_count(j, "threads", where));
    }
    read_opt(j, "checkpoints", where, c.checkpoints);
    if (j.contains("policy")) {
        c.policy = parse_policy(get<std::string>(j, "policy", where));
    }
    read_opt(j, "weight_baselines", where, c.weight_baselines);

    if (j.contains("clients") == j.contains("instance")) {
        throw ConfigError("config: give exactly one of 'clients' or 'instance'");
    }
    if (j.contains("clients")) {
        const auto& arr = j.at("clients");
        if (!arr.is_array() || arr.empty()) {
            throw ConfigError("config.clients: expected a non-empty array");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            c.clients.push_back(read_client(arr[i], fmt::format("clients[{}]", i)));
        }
        if (c.clients.size() > kMaxClients) {
            throw ConfigError(fmt::format("config.clients: at most {} clients", kMaxClients));
        }
    } else {
        c.instance = read_instance(j.at("instance"));
    }

    if (j.contains("point")) {
        const auto& p = j.at("point");
        reject_unknown(p, "point", {"mu", "sigma2"});
        OperatingPoint point{get<std::vector<double>>(p, "mu", "point"),
                             get<std::vector<double>>(p, "sigma2", "point")};
        const std::size_t n = c.instance ? c.instance->n_clients : c.clients.size();
        if (point.mu.size() != n || point.sigma2.size() != n) {
            throw ConfigError("point: mu and sigma2 must have one entry per client");
        }
        c.point = std::move(point);
    }
    if (j.contains("solver")) {
        c.solver = read_solver(j.at("solver"));
    }
    if (j.contains("truncation")) {
        const auto& t = j.at("truncation");
        reject_unknown(t, "truncation", {"k", "tail_tol"});
        if (t.contains("k")) {
            c.truncation.truncation_k = get_count(t, "k", "truncation");
        }
        read_opt(t, "tail_tol", "truncation", c.truncation.tail_tol);
        if (c.truncation.truncation_k < 1 || !(c.truncation.tail_tol >= 0.0)) {
            throw ConfigError("truncation: k must be >= 1 and tail_tol >= 0");
        }
    }
    if (j.contains("validate")) {
        const auto& v = j.at("validate");
        reject_unknown(v, "validate", {"p", "q", "lambda"});
        if (v.contains("p")) {
            c.validate.p = read_grid(v, "p", "validate");
        }
        if (v.contains("q")) {
            c.validate.q = read_grid(v, "q", "validate");
        }
        if (v.contains("lambda")) {
            c.validate.lambda = read_grid(v, "lambda", "validate");
        }
    }
    if (c.validate.p.empty()) {
        for (int k = 1; k <= 19; ++k) {
            c.validate.p.push_back(0.05 * k);
        }
    }
    if (j.contains("compare")) {
        const auto& v = j.at("compare");
        reject_unknown(v, "compare", {"policies", "independent_traces"});
        if (v.contains("policies")) {
            const auto names = get<std::vector<std::string>>(v, "policies", "compare");
            if (names.empty()) {
                throw ConfigError("compare.policies: list must be non-empty");
            }
            c.compare.policies.clear();
            for (const auto& name : names) {
                c.compare.policies.push_back(parse_policy(name));
            }
        }
        read_opt(v, "independent_traces", "compare", c.compare.independent_traces);
    }
    if (j.contains("stats")) {
        const auto& v = j.at("stats");
        reject_unknown(v, "stats", {"simulate"});
        read_opt(v, "simulate", "stats", c.stats_simulate);
    }

    if (c.horizon == 0 || c.runs == 0) {
        throw ConfigError("config: horizon and runs must be >= 1");
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::vector<ClientConfig> generate_instance(const InstanceSpec& spec) {
    Engine engine = make_stream(spec.seed, 0, spec.n_clients, StreamKind::kInstance);
    auto draw = [&](const Range& r) { return r.first + (r.second - r.first) * uniform01(engine); };
    const auto n = static_cast<double>(spec.n_clients);
    std::vector<ClientConfig> clients;
    try {
        for (std::size_t i = 0; i < spec.n_clients; ++i) {
            const double p = draw(spec.p_range);
            const double q = draw(spec.q_range);
            const double lambda = draw({spec.lambda_range.first / n, spec.lambda_range.second / n});
            const double alpha = spec.weighted ? draw(spec.alpha_range) : 1.0;
            clients.push_back({ChannelParams(p, q), UpdateModel(lambda, alpha)});
        }
    } catch (const DomainError& e) {
        throw ConfigError(fmt::format("instance ranges produce invalid clients: {}", e.what()));
    }
    return clients;
}

std::vector<ClientConfig> resolve_clients(const ExperimentConfig& config) {
    return config.instance ? generate_instance(*config.instance) : config.clients;
}

} // namespace sosched::cli
