#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

namespace qsync::tools {

/// Cross-check the FFT paths, the LTS fit, file formats and QBER scoring
/// against direct reference computations. Prints one PASS/FAIL line per
/// check and returns true when all pass.
bool run_selftest(std::ostream& out, std::uint64_t seed, std::size_t offset_cases);

}  // namespace qsync::tools
