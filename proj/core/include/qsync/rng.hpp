#pragma once

#include <cstdint>
#include <random>

namespace qsync {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, index), so values can be produced in any order and
/// re-derived in O(1). The mixer is SplitMix64's finalizer applied to a
/// Weyl-sequence combination of the three words.
///
/// Stream identifiers used by the library:
///   0  sync-string x_u draws (index u)
///   1  sync-string y_{u,j} draws (index u + j*L1)
///   2  schedule random-slot basis/bit words (index = global slot)
///   3+ seed derivation for trials and subsystems
struct CounterRng {
  std::uint64_t seed = 0;

  std::uint64_t bits(std::uint64_t stream, std::uint64_t index) const noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t index) const noexcept;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derive an independent child seed from a parent seed and a path of labels.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// Sequential engine used by the channel simulator.
using Engine = std::mt19937_64;

}  // namespace qsync
