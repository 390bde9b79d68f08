#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qsync {

/// Structure parameters of the public synchronization string.
/// Total length is L = L1 * N1: N1 periodic autocorrelation peaks spaced
/// L1 apart. lambda tunes the peak height c0.
struct SyncStringParams {
  std::size_t L1 = 1000;
  std::size_t N1 = 100;
  double lambda = 1.0;
  std::uint64_t seed = 0;

  std::size_t length() const noexcept { return L1 * N1; }
  /// Throws Error(invalid_argument) on L1 = 0, N1 = 0 or lambda outside (0, 1.5].
  void validate() const;

  bool operator==(const SyncStringParams&) const = default;
};

struct SyncString {
  std::vector<std::int8_t> bits;  // each +1 or -1
  SyncStringParams params;
  double c0_nominal = 0.0;

  std::size_t size() const noexcept { return bits.size(); }
  std::int8_t operator[](std::size_t i) const { return bits[i]; }
  std::span<const std::int8_t> view() const noexcept { return bits; }

  bool operator==(const SyncString&) const = default;
};

/// s_{u + j L1} = 2 H(y_{u,j} - lambda x_u) - 1 with x_u drawn from counter
/// stream 0 at index u and y_{u,j} from stream 1 at index u + j L1.
/// H(0) is taken as 1.
SyncString generate_sync_string(const SyncStringParams& params);

/// Design value of the peak height: lambda^2/3 for lambda <= 1, else 1 - 2 lambda/3.
double nominal_c0(double lambda);

/// Circular, mean-centered, variance-normalized autocorrelation at `lag`:
///   x_m = sum_i (s_i - mean)(s_{(i+m) mod L} - mean) / sum_i (s_i - mean)^2
/// x_0 is exactly 1. O(L). Throws out_of_range when lag >= L.
double autocorrelation(const SyncString& s, std::size_t lag);

/// Circular, mean-centered, unnormalized autocovariance (1/L) sum_i (s_i - m)(s_{i+m} - m).
/// For lambda <= 1 its expected value at peak lags is lambda^2/3.
double autocovariance(const SyncString& s, std::size_t lag);

/// All L lags of `autocorrelation` at once via FFT.
std::vector<double> autocorrelation_all(const SyncString& s);

/// Expected normalized autocorrelation at a peak lag j*L1 (j > 0) as L1 -> inf.
/// Equals nominal_c0 only at lambda = 1; see autocovariance for lambda < 1.
double expected_peak_autocorrelation(double lambda);

}  // namespace qsync
