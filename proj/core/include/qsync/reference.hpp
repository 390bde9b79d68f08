#pragma once

// Direct, unoptimized reference implementations. They share no code with
// the FFT paths and exist to cross-check them (unit tests, `qsync selftest`).

#include <cstddef>
#include <cstdint>
#include <span>

#include "qsync/framing.hpp"
#include "qsync/sync_string.hpp"

namespace qsync::reference {

/// x_m from the definition, with the mean and variance recomputed by a
/// plain double loop.
double autocorrelation(std::span<const std::int8_t> bits, std::size_t lag);

struct DirectArgmax {
  int i = 1;
  std::size_t u = 0;
  std::size_t j = 0;
  std::size_t delta = 0;
  std::int64_t value = 0;
};

/// Maximize C(D) = sum_n b[(n + D) mod N_f] a[n] over every D in [0, N_f),
/// where a is the sender frame with sync bits at n = c(M+1) and 0 elsewhere.
/// D is decomposed as (i-1) + (M+1)(u + L1 j); exact ties go to the lowest
/// (i, u, j). O(N_f L).
DirectArgmax direct_correlation_argmax(std::span<const std::int8_t> received,
                                       const SyncString& s, const FrameLayout& layout);

}  // namespace qsync::reference
