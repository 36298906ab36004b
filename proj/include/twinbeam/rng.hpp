#pragma once

#include <cstdint>
#include <random>

namespace twinbeam {

using Engine = std::mt19937_64;

/// One step of the SplitMix64 sequence; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Independent engine for the stream identified by (master_seed, domain, index).
/// The mapping is fixed, so a frame's randomness never depends on which worker
/// renders it or in which order.
Engine derive_stream(std::uint64_t master_seed, std::uint64_t domain, std::uint64_t index);

}  // namespace twinbeam
