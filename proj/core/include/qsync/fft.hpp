#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qsync::fft {

using cd = std::complex<double>;

enum class Direction { forward, inverse };

/// Real-to-complex transform; returns the n/2+1 non-redundant bins.
std::vector<cd> real_forward(std::span<const double> x);

/// In-place 1-D complex transform (unnormalized in both directions).
void transform(std::span<cd> x, Direction dir);

/// In-place row-major 2-D complex transform (unnormalized).
void transform_2d(std::span<cd> x, std::size_t rows, std::size_t cols, Direction dir);

/// Batched in-place transform of `count` contiguous rows of length `n`.
void transform_rows(std::span<cd> x, std::size_t count, std::size_t n, Direction dir);

}  // namespace qsync::fft
