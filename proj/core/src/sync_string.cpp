#include "qsync/sync_string.hpp"

#include <cmath>
#include <numeric>

#include "qsync/error.hpp"
#include "qsync/fft.hpp"
#include "qsync/rng.hpp"

namespace qsync {

void SyncStringParams::validate() const {
  if (L1 == 0 || N1 == 0)
    throw Error(ErrorCode::invalid_argument, "sync string needs L1 > 0 and N1 > 0");
  if (!(lambda > 0.0) || lambda > 1.5)
    throw Error(ErrorCode::invalid_argument, "lambda must lie in (0, 1.5]");
}

SyncString generate_sync_string(const SyncStringParams& params) {
  params.validate();
  const CounterRng rng{params.seed};
  SyncString s;
  s.params = params;
  s.c0_nominal = nominal_c0(params.lambda);
  s.bits.resize(params.length());
  for (std::size_t u = 0; u < params.L1; ++u) {
    const double threshold = params.lambda * rng.uniform(0, u);
    for (std::size_t j = 0; j < params.N1; ++j) {
      const std::size_t idx = u + j * params.L1;
      s.bits[idx] = rng.uniform(1, idx) >= threshold ? 1 : -1;
    }
  }
  return s;
}

double nominal_c0(double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::invalid_argument, "lambda must be positive");
  return lambda <= 1.0 ? lambda * lambda / 3.0 : 1.0 - 2.0 * lambda / 3.0;
}

namespace {

double mean_of(std::span<const std::int8_t> bits) {
  const long long sum = std::accumulate(bits.begin(), bits.end(), 0LL);
  return static_cast<double>(sum) / static_cast<double>(bits.size());
}

double centered_lag_sum(std::span<const std::int8_t> bits, double mean, std::size_t lag) {
  const std::size_t n = bits.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = i + lag;
    if (k >= n) k -= n;
    acc += (bits[i] - mean) * (bits[k] - mean);
  }
  return acc;
}

}  // namespace

double autocorrelation(const SyncString& s, std::size_t lag) {
  if (lag >= s.size()) throw Error(ErrorCode::out_of_range, "autocorrelation lag >= L");
  const double mean = mean_of(s.bits);
  if (lag == 0) return 1.0;
  const double var = centered_lag_sum(s.bits, mean, 0);
  if (var == 0.0) return 0.0;
  return centered_lag_sum(s.bits, mean, lag) / var;
}

double autocovariance(const SyncString& s, std::size_t lag) {
  if (lag >= s.size()) throw Error(ErrorCode::out_of_range, "autocovariance lag >= L");
  const double mean = mean_of(s.bits);
  return centered_lag_sum(s.bits, mean, lag) / static_cast<double>(s.size());
}

std::vector<double> autocorrelation_all(const SyncString& s) {
  const std::size_t n = s.size();
  if (n == 0) return {};
  const double mean = mean_of(s.bits);
  std::vector<fft::cd> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = s.bits[i] - mean;
  fft::transform(buf, fft::Direction::forward);
  for (auto& v : buf) v = std::norm(v);
  fft::transform(buf, fft::Direction::inverse);
  std::vector<double> out(n);
  const double zero = buf[0].real();
  out[0] = 1.0;
  for (std::size_t m = 1; m < n; ++m) out[m] = zero == 0.0 ? 0.0 : buf[m].real() / zero;
  return out;
}

double expected_peak_autocorrelation(double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::invalid_argument, "lambda must be positive");
  // E[s | x] = 1 - 2 lambda x on the part of (0,1) where lambda x < 1, -1 beyond.
  double mean, second;
  if (lambda <= 1.0) {
    mean = 1.0 - lambda;
    second = 1.0 - 2.0 * lambda + 4.0 * lambda * lambda / 3.0;
  } else {
    mean = 1.0 / lambda - 1.0;
    second = 1.0 - 2.0 / (3.0 * lambda);
  }
  const double cov = second - mean * mean;
  const double var = 1.0 - mean * mean;
  return cov / var;
}

}  // namespace qsync
