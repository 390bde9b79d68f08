#include "qsync/rng.hpp"

#include "qsync/error.hpp"

namespace qsync {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::out_of_range: return "out of range";
    case ErrorCode::too_few_detections: return "too few detections";
    case ErrorCode::no_spectral_peak: return "no spectral peak";
    case ErrorCode::unwrap_failure: return "unwrap failure";
    case ErrorCode::empty_gate: return "empty gate";
    case ErrorCode::missing_detector: return "missing detector";
    case ErrorCode::layout_mismatch: return "layout mismatch";
    case ErrorCode::parse_error: return "parse error";
    case ErrorCode::io_error: return "io error";
    case ErrorCode::no_sifted_bits: return "no sifted bits";
  }
  return "unknown";
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t CounterRng::bits(std::uint64_t stream, std::uint64_t index) const noexcept {
  constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t h = mix64(seed + golden);
  h = mix64(h ^ (stream * 0xd1b54a32d192ed03ULL + golden));
  return mix64(h + index * golden);
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t index) const noexcept {
  // 53 random bits, shifted by half an ulp so 0 and 1 are never returned.
  const std::uint64_t top = bits(stream, index) >> 11;
  return (static_cast<double>(top) + 0.5) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b) noexcept {
  return CounterRng{parent}.bits(3 + a, b);
}

}  // namespace qsync
