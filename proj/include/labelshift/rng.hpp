#pragma once
// Deterministic seed derivation for replicate and resample streams.

#include <cstdint>

namespace labelshift {

// splitmix64 step (Steele, Lea, Flood 2014); standard mixing constants.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seed for stream k derived from a base seed; distinct k give decorrelated
// generator states regardless of the base value.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t k) {
  std::uint64_t state = base ^ (0xd1342543de82ef95ull * (k + 1));
  return splitmix64_next(state);
}

}  // namespace labelshift
