#pragma once

#include <cstdint>
#include <random>

namespace micpdag {

/// All randomness goes through std::mt19937_64. A substream is identified by
/// (seed, stream, index) and seeded through std::seed_seq over the 32-bit
/// halves of each component, so substreams are independent of the order in
/// which they are created.
using Rng = std::mt19937_64;

namespace streams {
inline constexpr std::uint64_t kNoise = 1;      // one substream per column of epsilon
inline constexpr std::uint64_t kWeights = 2;    // edge weights
inline constexpr std::uint64_t kVariances = 3;  // noise variances
inline constexpr std::uint64_t kGraph = 4;      // random DAG structure
inline constexpr std::uint64_t kInstance = 5;   // random test/oracle instances
}  // namespace streams

Rng make_substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace micpdag
