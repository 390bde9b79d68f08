#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qsync/framing.hpp"

namespace qsync {

/// Detector labels share the polarization enumeration: detector H clicks for
/// an H photon, and so on.
using Detector = Polarization;
inline constexpr std::array<Detector, 4> all_detectors{Detector::H, Detector::V, Detector::D,
                                                       Detector::A};

/// Sender and receiver clocks. All times are picoseconds on the receiver's
/// time base; the sender period as seen by the receiver is tau_A (1 + rho).
struct ClockModel {
  double tau_A_ps = 20000.0;
  double rho = 0.0;
  double t0_ps = 1.0e6;
  double sigma_ps = 50.0;
  /// Std of the per-frame Gaussian random-walk increment applied to rho.
  double wander_step = 0.0;

  double tau_B_ps() const noexcept { return tau_A_ps * (1.0 + rho); }
  void validate() const;
};

struct ChannelParams {
  double loss_db = 0.0;
  double mu = 1.0;
  /// Dark-count probability per slot per detector.
  double dark_rate = 0.0;
  double det_eff = 1.0;
  /// Probability that the receiver measures in the Z basis.
  double z_basis_prob = 0.9;
  /// Bit-flip probability in the matching basis.
  double e_mis = 0.0;

  double transmittance() const noexcept;
  /// 1 - exp(-mu * eta) for a Poissonian source.
  double click_probability() const noexcept;
  void validate() const;
};

/// Per-detector constant timing offsets, referenced to detector H.
struct PathDelays {
  std::array<double, 4> ps{0.0, 0.0, 0.0, 0.0};

  double operator[](Detector d) const noexcept { return ps[static_cast<std::size_t>(d)]; }
  double& operator[](Detector d) noexcept { return ps[static_cast<std::size_t>(d)]; }
  bool operator==(const PathDelays&) const = default;
};

enum class TruthKind : std::uint8_t { sync = 0, random = 1, dark = 2 };
const char* to_string(TruthKind k) noexcept;

struct DetectionRecord {
  std::int64_t t_ps = 0;
  Detector detector = Detector::H;
  std::optional<std::int64_t> truth_slot;
  std::optional<TruthKind> truth_kind;

  bool operator==(const DetectionRecord&) const = default;
};

/// Time-ordered detections.
using DetectionStream = std::vector<DetectionRecord>;

/// Half-open range of global pulse slots to simulate.
struct SlotRange {
  std::uint64_t begin = 0;
  std::uint64_t end = std::numeric_limits<std::uint64_t>::max();
};

/// Simulate Bob's detections for the pulses of `schedule` in `range`
/// (clipped to the schedule). Records with a negative timestamp are dropped.
/// Deterministic in `seed`; signal clicks, dark counts and clock wander use
/// independent sub-streams.
DetectionStream transmit(const FrameSchedule& schedule, const ClockModel& clock,
                         const ChannelParams& ch, const PathDelays& delays, std::uint64_t seed,
                         SlotRange range = {});

struct Scenario {
  std::string name;
  ClockModel clock;
  ChannelParams channel;
  PathDelays delays;
};

/// Named parameter sets: "ideal", "fig4_delays", "continuous" and
/// "table1_loss{17.6,20.0,22.7,26.5,29.7}". Throws invalid_argument otherwise.
Scenario scenario_presets(const std::string& name);
std::vector<std::string> preset_names();

/// Table-1 losses in dB.
inline constexpr std::array<double, 5> table1_losses{17.6, 20.0, 22.7, 26.5, 29.7};

}  // namespace qsync
