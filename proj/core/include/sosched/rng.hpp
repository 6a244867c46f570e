#pragma once

#include <cstdint>
#include <random>

namespace sosched {

/// Purpose tags so that independent consumers of the same (run, client)
/// pair never share a stream.
enum class StreamKind : std::uint32_t {
    kChannel = 1,  // channel state evolution (trace sampling)
    kClient = 2,   // per-slot update generation + channel in the simulator
    kPolicy = 3,   // scheduler randomization
    kSampler = 4,  // reference delivery sampler
    kSolver = 5,   // random starts of the operating-point solver
    kInstance = 6, // randomized client parameters
};

using Engine = std::mt19937_64;

/// Engine keyed by (master seed, run, client, kind). The derivation depends
/// only on the key, so results do not depend on which thread draws first.
inline Engine make_stream(std::uint64_t seed, std::uint64_t run, std::uint64_t client,
                          StreamKind kind) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                      static_cast<std::uint32_t>(client),
                      static_cast<std::uint32_t>(client >> 32),
                      static_cast<std::uint32_t>(kind)};
    return Engine(seq);
}

/// Uniform double in [0, 1) from the top 53 bits. Portable across standard
/// libraries, unlike std::uniform_real_distribution.
inline double uniform01(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

} // namespace sosched
