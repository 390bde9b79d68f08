#include <gtest/gtest.h>

#include <set>

#include "qsync/rng.hpp"

namespace {

TEST(CounterRng, SameInputsGiveSameBits) {
  const qsync::CounterRng a{42}, b{42};
  for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(a.bits(1, i), b.bits(1, i));
}

TEST(CounterRng, StreamsAndSeedsDiffer) {
  const qsync::CounterRng a{42}, b{43};
  EXPECT_NE(a.bits(0, 5), a.bits(1, 5));
  EXPECT_NE(a.bits(0, 5), b.bits(0, 5));
  EXPECT_NE(a.bits(0, 5), a.bits(0, 6));
}

TEST(CounterRng, UniformIsOpenUnitIntervalWithMeanHalf) {
  const qsync::CounterRng r{7};
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform(2, static_cast<std::uint64_t>(i));
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // Std of the mean is sqrt(1/12/n) ~ 6.5e-4.
  EXPECT_NEAR(sum / n, 0.5, 4e-3);
}

TEST(DeriveSeed, ChildrenAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(qsync::derive_seed(9, a, b));
  EXPECT_EQ(seen.size(), 400u);
}

}  // namespace
