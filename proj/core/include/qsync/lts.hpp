#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qsync {

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  /// 1.4826 * median |residual| over all points.
  double residual_std = 0.0;
  /// Size of the retained (trimmed) subset.
  std::size_t n_used = 0;
  std::size_t iterations = 0;

  double operator()(double x) const noexcept { return intercept + slope * x; }
};

LineFit least_squares(std::span<const double> x, std::span<const double> y);

struct LtsOptions {
  /// Fraction of points allowed to be outliers; the fit keeps
  /// h = ceil((1 - trim_fraction) n) points, at least 2.
  double trim_fraction = 0.5;
  std::size_t max_iterations = 50;
  /// Number of deterministic elemental (two-point) starts in addition to the
  /// supplied start and the full least-squares start.
  std::size_t elemental_starts = 16;
  std::uint64_t seed = 0x5eed;
};

/// Least-trimmed-squares line fit by concentration steps: from each start,
/// keep the h points with smallest squared residuals, refit, repeat until
/// the trimmed objective stops decreasing or the iteration cap is hit.
LineFit lts_fit(std::span<const double> x, std::span<const double> y, const LtsOptions& opt = {},
                std::optional<LineFit> start = std::nullopt);

/// Indices of the h points with smallest |y - fit(x)|, in ascending index order.
std::vector<std::size_t> trimmed_subset(std::span<const double> x, std::span<const double> y,
                                        const LineFit& fit, std::size_t h);

}  // namespace qsync
