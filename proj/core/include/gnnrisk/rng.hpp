#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gnnrisk {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive seed derivation: derive_seed(m, {i, r, v, stage}) names one
/// independent stream per cell and stage.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : parts) {
    h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  }
  return h;
}

/// Stage tags for derive_seed.
enum class Stage : std::uint64_t {
  kSplit = 1,
  kSelectVictim = 2,
  kSelectSurrogate = 3,
  kTrainVictim = 4,
  kTrainSurrogate = 5,
  kTargets = 6,
  kAttack = 7,
  kPoison = 8,
};

constexpr std::uint64_t stage_tag(Stage s) { return static_cast<std::uint64_t>(s); }

}  // namespace gnnrisk
