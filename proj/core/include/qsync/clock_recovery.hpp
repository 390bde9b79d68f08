#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "qsync/channel.hpp"
#include "qsync/lts.hpp"

namespace qsync {

/// Receiver period estimate. Signal arrivals lie near phase_origin_ps + m * tau_B_ps.
struct PeriodEstimate {
  double tau_B0_ps = 0.0;  // coarse FFT period
  double k = 0.0;          // LTS slope of the folded phase against time
  double tau_B_ps = 0.0;   // tau_B0 / (1 - k)
  std::size_t n_samples = 0;
  double residual_std_ps = 0.0;
  double phase_origin_ps = 0.0;
};

/// Map a time onto the receiver slot grid: the signed distance to the
/// nearest grid point, in (-tau/2, tau/2].
double phase_residual(double t_ps, double tau_ps, double phase_ref_ps) noexcept;

struct CoarseFftOptions {
  std::size_t n_samples = 1'000'000;
  /// Search half-width around 1/tau_A_hint as a fraction of that frequency.
  double search_window = 0.01;
  /// Peak power must exceed this multiple of the mean power in the window.
  double min_peak_ratio = 20.0;
  std::size_t min_detections = 100;
};

/// Bin the first n_samples * tau_A/4 of the stream into occupancy counts
/// (sample rate 4/tau_A), take the magnitude spectrum and return the
/// period of the strongest bin near 1/tau_A_hint.
double coarse_period_fft(const DetectionStream& stream, double tau_A_hint_ps,
                         const CoarseFftOptions& opt = {});

struct RefineOptions {
  double trim_fraction = 0.5;
  std::size_t max_iterations = 50;
  /// Bound on |tau_B/tau_B0 - 1| assumed when sizing unwrap segments.
  /// One FFT bin at the default n_samples is 4e-6.
  double max_relative_slope = 4e-6;
  std::size_t min_detections = 100;
  std::size_t min_segment_points = 8;
};

struct SegmentDiagnostic {
  double t_start_ps = 0.0;
  double t_end_ps = 0.0;
  std::size_t count = 0;
  double slope = 0.0;
  double intercept_ps = 0.0;  // unwrapped folded phase at t_start
};

/// Refine tau_B0 by a least-trimmed-squares fit of mod_{tau_B0}(t) against t.
/// The folded phase is unwrapped segment by segment (segments short enough
/// that drift stays below tau_B0/4) before the global fit.
PeriodEstimate refine_period_lts(const DetectionStream& stream, double tau_B0_ps,
                                 const RefineOptions& opt = {},
                                 std::vector<SegmentDiagnostic>* diagnostics = nullptr);

struct GateConfig {
  double sigma_g_ps = 50.0;
  std::size_t D = 100;
  /// Acceptance radius in units of sigma_g.
  double acceptance = 3.0;
};

/// Keep detections whose phase residual lies within acceptance * sigma_g.
/// phase_ref defaults to est.phase_origin_ps. Throws empty_gate if nothing survives.
DetectionStream gate_filter(const DetectionStream& stream, const PeriodEstimate& est,
                            const GateConfig& gate, std::optional<double> phase_ref = std::nullopt);

/// Mean of |E_a(b)|^2 = (r_{a+b} - r_a)^2 over b = 1..D, averaged over every
/// anchor a with a full window; r are phase residuals against the grid.
double interval_error_statistic(const DetectionStream& stream, const PeriodEstimate& est,
                                std::size_t D, std::optional<double> phase_ref = std::nullopt);

struct PathDelayEstimate {
  PathDelays delays;
  std::array<std::size_t, 4> counts{};
  /// Set when |t_d| > tau_B/4: the folded value cannot be told apart from
  /// its alias one period away.
  std::array<bool, 4> ambiguous{};

  bool any_ambiguous() const noexcept {
    return ambiguous[0] || ambiguous[1] || ambiguous[2] || ambiguous[3];
  }
};

/// Per-detector LTS fit of the folded arrival phase; t_d^P is the intercept
/// difference to detector H. Throws missing_detector if a label has fewer
/// than `min_per_detector` detections.
PathDelayEstimate estimate_path_delays(const DetectionStream& stream, const PeriodEstimate& est,
                                       std::size_t min_per_detector = 100);

/// t' = t - t_d[detector], re-sorted by time.
DetectionStream compensate_delays(const DetectionStream& stream, const PathDelays& delays);

/// Histogram of phase residuals over (-tau/2, tau/2] with `bins` equal bins.
std::vector<std::size_t> phase_histogram(const DetectionStream& stream, const PeriodEstimate& est,
                                         std::size_t bins);

/// coarse_period_fft followed by refine_period_lts, with the unwrap slope
/// bound widened to one FFT bin of the coarse stage.
PeriodEstimate recover_period(const DetectionStream& stream, double tau_A_hint_ps,
                              const CoarseFftOptions& coarse = {},
                              const RefineOptions& refine = {});

}  // namespace qsync
