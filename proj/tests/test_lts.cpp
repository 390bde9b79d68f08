#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qsync/error.hpp"
#include "qsync/lts.hpp"

namespace {

TEST(LeastSquares, ExactLine) {
  const std::vector<double> x{0, 1, 2, 3, 4}, y{1, 3, 5, 7, 9};
  const auto f = qsync::least_squares(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
}

TEST(Lts, RecoversLineUnderFortyPercentContamination) {
  std::mt19937_64 eng(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::uniform_real_distribution<double> junk(-500.0, 500.0);
  std::vector<double> x, y;
  for (int i = 0; i < 1000; ++i) {
    x.push_back(i * 0.01);
    y.push_back(i % 5 < 2 ? junk(eng) : 4.0 - 1.5 * x.back() + noise(eng));
  }
  const auto f = qsync::lts_fit(x, y);
  EXPECT_NEAR(f.slope, -1.5, 0.02);
  EXPECT_NEAR(f.intercept, 4.0, 0.05);
  EXPECT_EQ(f.n_used, 500u);
  // Plain least squares is pulled far off by the same data.
  EXPECT_GT(std::abs(qsync::least_squares(x, y).intercept - 4.0), 1.0);
}

TEST(Lts, TrimmedSubsetKeepsSmallestResiduals) {
  const std::vector<double> x{0, 1, 2, 3}, y{0, 1, 10, 3};
  const auto idx = qsync::trimmed_subset(x, y, {0.0, 1.0}, 3);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 3}));
}

TEST(Lts, RejectsTooFewPoints) {
  const std::vector<double> x{1}, y{1};
  EXPECT_THROW(qsync::lts_fit(x, y), qsync::Error);
}

}  // namespace
