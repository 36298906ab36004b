#include "twinbeam/rng.hpp"

#include <array>

namespace twinbeam {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Engine derive_stream(std::uint64_t master_seed, std::uint64_t domain, std::uint64_t index) {
  std::uint64_t state = master_seed;
  const std::uint64_t a = splitmix64(state);
  state ^= domain * 0xd1b54a32d192ed03ULL;
  const std::uint64_t b = splitmix64(state);
  state ^= index * 0x8cb92ba72f3d8dd7ULL;
  const std::uint64_t c = splitmix64(state);
  const std::uint64_t d = splitmix64(state);

  std::array<std::uint32_t, 8> words{};
  const std::array<std::uint64_t, 4> parts{a, b, c, d};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    words[2 * i] = static_cast<std::uint32_t>(parts[i]);
    words[2 * i + 1] = static_cast<std::uint32_t>(parts[i] >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

}  // namespace twinbeam
