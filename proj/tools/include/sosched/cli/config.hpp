#pragma once

// Experiment configuration: one JSON document per experiment. Unknown keys
// are rejected at every level; see README.md for the schema.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sosched/capacity.hpp"
#include "sosched/channel.hpp"
#include "sosched/policies.hpp"
#include "sosched/sim.hpp"
#include "sosched/solver.hpp"

namespace sosched::cli {

using Range = std::pair<double, double>;

/// Random instance drawn from the instance seed: p, q ~ U(p_range), U(q_range);
/// lambda ~ U(lambda_range / N); alpha ~ U(alpha_range) when weighted, else 1.
struct InstanceSpec {
    std::size_t n_clients = 5;
    std::uint64_t seed = 1;
    Range p_range{0.05, 0.95};
    Range q_range{0.05, 0.95};
    /// Scaled by 1/N at draw time.
    Range lambda_range{0.1, 1.0};
    bool weighted = false;
    Range alpha_range{1.0, 5.0};
};

struct ValidateSpec {
    std::vector<double> p;
    std::vector<double> q{0.2, 0.8};
    std::vector<double> lambda{1.0, 0.1};
};

struct CompareSpec {
    std::vector<PolicyKind> policies{PolicyKind::kVwd, PolicyKind::kWhittle,
                                     PolicyKind::kRandomized, PolicyKind::kMaxWeight};
    bool independent_traces = false;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::filesystem::path out = "out";
    std::uint64_t seed = 1;
    std::uint64_t runs = 200;
    std::uint64_t horizon = 20000;
    std::uint64_t warmup = 0;
    unsigned threads = 0;
    std::vector<std::uint64_t> checkpoints;
    PolicyKind policy = PolicyKind::kVwd;
    bool weight_baselines = false;

    std::vector<ClientConfig> clients;
    std::optional<InstanceSpec> instance;
    std::optional<OperatingPoint> point;

    SolverConfig solver;
    TruncationOptions truncation;
    ValidateSpec validate;
    CompareSpec compare;
    bool stats_simulate = false;
};

/// Parses and validates a JSON document. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Draws an instance. Deterministic in `spec`.
std::vector<ClientConfig> generate_instance(const InstanceSpec& spec);

/// Explicit clients if given, otherwise the generated instance.
std::vector<ClientConfig> resolve_clients(const ExperimentConfig& config);

} // namespace sosched::cli
