#pragma once

#include <stdexcept>
#include <string>

namespace qsync {

enum class ErrorCode {
  invalid_argument,
  out_of_range,
  too_few_detections,
  no_spectral_peak,
  unwrap_failure,
  empty_gate,
  missing_detector,
  layout_mismatch,
  parse_error,
  io_error,
  no_sifted_bits,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qsync
