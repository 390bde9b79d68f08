#include <gtest/gtest.h>

#include <cmath>

#include "qsync/error.hpp"
#include "qsync/reference.hpp"
#include "qsync/sync_string.hpp"

namespace {

using qsync::SyncStringParams;

TEST(SyncString, SymbolsAreSignsAndLengthIsL1TimesN1) {
  const auto s = qsync::generate_sync_string({37, 11, 1.0, 3});
  ASSERT_EQ(s.size(), 37u * 11u);
  for (auto b : s.bits) EXPECT_TRUE(b == 1 || b == -1);
}

TEST(SyncString, DeterministicInSeed) {
  const SyncStringParams p{100, 20, 0.7, 12};
  EXPECT_EQ(qsync::generate_sync_string(p), qsync::generate_sync_string(p));
  SyncStringParams q = p;
  q.seed = 13;
  EXPECT_NE(qsync::generate_sync_string(p).bits, qsync::generate_sync_string(q).bits);
}

TEST(SyncString, RejectsBadParameters) {
  EXPECT_THROW(qsync::generate_sync_string({0, 10, 1.0, 0}), qsync::Error);
  EXPECT_THROW(qsync::generate_sync_string({10, 0, 1.0, 0}), qsync::Error);
  EXPECT_THROW(qsync::generate_sync_string({10, 10, 0.0, 0}), qsync::Error);
  EXPECT_THROW(qsync::generate_sync_string({10, 10, 1.6, 0}), qsync::Error);
}

TEST(SyncString, NominalPeakHeight) {
  EXPECT_DOUBLE_EQ(qsync::nominal_c0(1.0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(qsync::nominal_c0(0.5), 0.25 / 3.0);
  EXPECT_DOUBLE_EQ(qsync::nominal_c0(1.5), 0.0);
}

TEST(Autocorrelation, ZeroLagIsOneAndOutOfRangeThrows) {
  const auto s = qsync::generate_sync_string({50, 10, 1.0, 1});
  EXPECT_DOUBLE_EQ(qsync::autocorrelation(s, 0), 1.0);
  EXPECT_THROW(qsync::autocorrelation(s, s.size()), qsync::Error);
}

TEST(Autocorrelation, FftMatchesDirectDefinition) {
  const auto s = qsync::generate_sync_string({64, 8, 0.8, 5});
  const auto all = qsync::autocorrelation_all(s);
  ASSERT_EQ(all.size(), s.size());
  for (std::size_t lag = 0; lag < s.size(); ++lag)
    ASSERT_NEAR(all[lag], qsync::reference::autocorrelation(s.view(), lag), 1e-9) << lag;
}

// Averaging over seeds, lambda = 1 peaks sit at 1/3 and off-peak lags at 0.
TEST(Autocorrelation, SeedAveragedPeaksAtOneThird) {
  const std::size_t L1 = 500, N1 = 40, seeds = 8;
  double peak = 0.0, off = 0.0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const auto s = qsync::generate_sync_string({L1, N1, 1.0, seed});
    const auto x = qsync::autocorrelation_all(s);
    for (std::size_t j = 1; j < N1; ++j) peak += x[j * L1];
    off += x[L1 / 2] + x[3 * L1 / 2 + 7];
  }
  EXPECT_NEAR(peak / (seeds * (N1 - 1)), 1.0 / 3.0, 0.01);
  EXPECT_NEAR(off / (2 * seeds), 0.0, 0.02);
}

// Monte-Carlo oracle for lambda < 1: the unnormalized centered covariance
// at a peak lag matches lambda^2/3; the normalized value is smaller by the
// string variance 1 - (1 - lambda)^2.
TEST(Autocorrelation, LambdaBelowOneConventions) {
  const double lambda = 0.6;
  const std::size_t L1 = 4000, N1 = 25;
  double cov = 0.0, corr = 0.0;
  const int seeds = 4;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto s = qsync::generate_sync_string({L1, N1, lambda, static_cast<std::uint64_t>(seed)});
    for (std::size_t j = 1; j <= 3; ++j) {
      cov += qsync::autocovariance(s, j * L1);
      corr += qsync::autocorrelation(s, j * L1);
    }
  }
  cov /= seeds * 3;
  corr /= seeds * 3;
  EXPECT_NEAR(cov, lambda * lambda / 3.0, 0.01);
  EXPECT_NEAR(corr, qsync::expected_peak_autocorrelation(lambda), 0.01);
  EXPECT_NEAR(qsync::expected_peak_autocorrelation(lambda),
              lambda * lambda / 3.0 / (1.0 - (1.0 - lambda) * (1.0 - lambda)), 1e-12);
}

}  // namespace
