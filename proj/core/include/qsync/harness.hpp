#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsync/channel.hpp"
#include "qsync/clock_recovery.hpp"
#include "qsync/framing.hpp"
#include "qsync/offset_recovery.hpp"
#include "qsync/sync_string.hpp"

namespace qsync {

enum class SyncMode { distributed, start_only };

/// How the per-detector delays are removed before period recovery.
enum class DelayCompensation {
  /// Estimate once from a separate long calibration run, then apply to every trial.
  calibrated,
  /// Subtract the planted values.
  planted,
  none,
};

struct ContinuousConfig {
  double duration_s = 10.0;
  std::size_t window_frames = 25;
  double loss_db = 20.0;
};

/// Experiment-level knobs. Serialized as versioned JSON (see config_to_json).
struct ExperimentConfig {
  static constexpr int current_version = 1;

  std::string preset = "table1_loss20.0";
  Scenario scenario = scenario_presets("table1_loss20.0");
  SyncStringParams sync{1000, 100, 1.0, 1};
  std::size_t M = 1;
  /// Frames accumulated per trial. 0 selects 1 for losses <= 22.7 dB and 8 above.
  std::size_t K = 0;
  std::size_t trials = 50;
  std::uint64_t seed = 7;
  SyncMode mode = SyncMode::distributed;
  Stage2Search search = Stage2Search::stage1_optimum;
  double success_threshold = 5.0;
  /// Gate width; 0 means sigma of the scenario clock.
  double sigma_g_ps = 0.0;
  double gate_acceptance = 3.0;
  DelayCompensation delay_compensation = DelayCompensation::calibrated;
  std::size_t calibration_frames = 20;
  std::vector<double> table1_losses{17.6, 20.0, 22.7, 26.5, 29.7};
  std::vector<double> table2_losses{26.5, 29.7};
  std::vector<std::size_t> table2_K{1, 2, 4, 8};
  ContinuousConfig continuous;
  CoarseFftOptions coarse;
  RefineOptions refine;
  /// Worker threads for trials; 0 uses the hardware concurrency.
  std::size_t threads = 1;
  /// Adds a runtime_ms column to the results CSV, which then differs run to run.
  bool timing = false;

  void validate() const;
  std::size_t K_for_loss(double loss_db) const noexcept;
  GateConfig gate() const noexcept;
};

std::string config_to_json(const ExperimentConfig& cfg);
/// Keys absent from the document keep the values of `base`. Throws
/// parse_error on unknown keys, wrong types or an unsupported "version".
ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct AlignedDetection {
  std::int64_t slot = 0;  // Alice's global slot as inferred by Bob
  Detector detector = Detector::H;
};

struct QberResult {
  std::size_t sifted = 0;
  std::size_t errors = 0;
  double qber() const noexcept {
    return sifted ? static_cast<double>(errors) / static_cast<double>(sifted) : 0.0;
  }
};

/// Errors over Z-basis detections on Z-prepared random slots. Slots outside
/// the schedule are ignored. Throws no_sifted_bits when nothing is sifted.
QberResult compute_qber(std::span<const AlignedDetection> aligned, const FrameSchedule& schedule);

struct TrialRecord {
  double loss_db = 0.0;
  std::size_t K = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool success_truth = false;
  bool success_threshold = false;
  double confidence = 0.0;
  std::size_t slot_offset = 0;
  std::size_t true_offset = 0;
  std::size_t sifted = 0;
  std::size_t errors = 0;
  double qber = 0.0;  // NaN when nothing was sifted
  double tau_B_hat_ps = 0.0;
  double tau_B_true_ps = 0.0;
  double fill_fraction = 0.0;
  std::size_t detections = 0;
  double runtime_ms = 0.0;
  std::string error;  // empty unless the pipeline threw
};

struct WilsonInterval {
  double center = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};
WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z = 1.96);

struct CellSummary {
  double loss_db = 0.0;
  std::size_t K = 0;
  std::size_t trials = 0;
  std::size_t successes_truth = 0;
  std::size_t successes_threshold = 0;
  WilsonInterval p_s_truth;
  WilsonInterval p_s_threshold;
  /// Pooled errors / sifted over ground-truth successful trials (NaN if none).
  double qber = 0.0;
  /// Mean of per-trial QBER over ground-truth successful trials (NaN if none).
  double qber_mean = 0.0;
  double tau_B_hat_mean_ps = 0.0;
  double tau_B_true_ps = 0.0;
  /// Largest |tau_hat / tau - 1| over trials that produced an estimate.
  double tau_B_rel_error_max = 0.0;
  std::size_t errors = 0;
};

struct ExperimentResult {
  std::string name;
  std::vector<TrialRecord> trials;
  std::vector<CellSummary> cells;
  PathDelays applied_delays;
};

/// Fixed-seed public sync string of the experiment.
SyncString experiment_sync_string(const ExperimentConfig& cfg);

/// Delays subtracted from every trial according to cfg.delay_compensation.
PathDelays resolve_delays(const ExperimentConfig& cfg);

/// One end-to-end trial: simulate K+2 frames from a random receiver start,
/// recover the period, gate, recover the offset from K accumulated frames
/// and score it against ground truth. Pipeline errors are caught and
/// recorded in TrialRecord::error.
TrialRecord run_trial(const ExperimentConfig& cfg, const SyncString& sync,
                      const PathDelays& compensation, double loss_db, std::size_t K,
                      std::size_t trial);

/// Every loss of cfg.table1_losses with K = cfg.K_for_loss(loss).
ExperimentResult run_table1(const ExperimentConfig& cfg);
/// cfg.table2_losses x cfg.table2_K.
ExperimentResult run_table2(const ExperimentConfig& cfg);

struct WindowRecord {
  std::size_t window = 0;
  double t_s = 0.0;              // window start, seconds since the first detection
  double time_error_ps = 0.0;    // median arrival error against the model, unwrapped
  double time_error_wrapped_ps = 0.0;
  double qber = 0.0;
  std::size_t sifted = 0;
  bool offset_success = true;    // distributed mode: per-window offset matched truth
  std::string error;
};

struct ContinuousResult {
  std::vector<WindowRecord> distributed;
  std::vector<WindowRecord> start_only;
  /// First start_only window whose |time error| exceeds tau/2, if any.
  std::optional<std::size_t> horizon_window;
  double tau_B_ps = 0.0;
};

/// Long run under clock wander. Distributed mode re-derives period and
/// offset in every window of cfg.continuous.window_frames frames;
/// start_only fixes the model from window 0 of a transmission that carries
/// the sync string in its first frame only.
ContinuousResult run_continuous_comparison(const ExperimentConfig& cfg);

struct DelayTrial {
  std::size_t trial = 0;
  PathDelays estimated;
  PathDelays planted;
  double max_abs_error_ps = 0.0;
  std::string error;
};

/// Repeated estimation of the per-detector delays of cfg.scenario over
/// cfg.calibration_frames frames.
std::vector<DelayTrial> run_delay_estimation(const ExperimentConfig& cfg);

void write_trials_csv(std::ostream& out, const ExperimentResult& r, bool timing);
/// One row per (loss, K) cell with Wilson 95% bounds.
void write_summary_csv(std::ostream& out, const ExperimentResult& r);
std::string summary_json(const ExperimentResult& r, const ExperimentConfig& cfg);
void write_continuous_csv(std::ostream& out, const ContinuousResult& r);
void write_delays_csv(std::ostream& out, const std::vector<DelayTrial>& trials);

}  // namespace qsync
