#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qsync/channel.hpp"
#include "qsync/clock_recovery.hpp"
#include "qsync/framing.hpp"
#include "qsync/sync_string.hpp"

namespace qsync {

/// Bob's ternary view of one frame window: H -> +1, V -> -1, X-basis clicks,
/// empty slots and H/V conflicts -> 0.
struct ReceivedString {
  std::vector<std::int8_t> values;
  double start_slot_time_ps = 0.0;
  FrameLayout layout;
  std::size_t skipped = 0;    // visited records that round outside [0, n_slots)
  std::size_t conflicts = 0;  // slots with both H and V clicks
};

/// Slot index of a record is round((t - start) / tau_B). Only records within
/// half a slot of the window are visited, so `stream` may be much longer.
ReceivedString build_received_string(const DetectionStream& stream, const PeriodEstimate& est,
                                     double start_ps, const FrameLayout& layout,
                                     std::size_t n_slots = 0);

/// (M+1) rows of length L: row i (1-based), column c = s[c(M+1) + i - 1].
struct RowDecomposition {
  FrameLayout layout;
  std::vector<std::vector<std::int8_t>> rows;  // rows[i-1]
};

RowDecomposition separate_rows(std::span<const std::int8_t> values, const FrameLayout& layout);
RowDecomposition separate_rows(const ReceivedString& s);

struct OffsetResult {
  int i_opt = 1;           // 1-based row in [1, M+1]
  std::size_t u_opt = 0;   // in [0, L1)
  std::size_t j_opt = 0;   // in [0, N1)
  /// Position in Bob's window where Alice's frame starts:
  /// (i_opt - 1) + (M+1)(u_opt + L1 j_opt).
  std::size_t slot_offset = 0;
  double offset_ps = 0.0;  // tau_B * slot_offset
  double confidence = 0.0;
  bool success = false;
  std::int64_t peak = 0;          // direct correlation at the optimum
  std::int64_t stage1_peak = 0;   // DC-column correlation at (i_opt, u_opt)

  bool operator==(const OffsetResult&) const = default;
};

enum class Stage2Search {
  /// Horizontal correlation only at the stage-1 optimum (the fast method).
  stage1_optimum,
  /// Horizontal correlation at every (i, u); exact maximizer of the direct
  /// correlation, computed as one 2-D FFT correlation per row.
  exhaustive,
};

struct FindOffsetOptions {
  Stage2Search search = Stage2Search::stage1_optimum;
  /// success = confidence >= threshold, confidence = (peak - mean) / std of
  /// the horizontal correlation array at the chosen (i, u).
  double success_threshold = 5.0;
};

/// Correlation arrays for plotting.
struct CorrelationTrace {
  std::vector<std::vector<std::int64_t>> stage1;  // [row][u], indexed by reported u
  std::vector<std::int64_t> stage2;               // [j] at (i_opt, u_opt), indexed by reported j
};

/// Two-stage search for the frame offset. The sync string is reshaped to
/// an L1 x N1 matrix whose rows are FFT'd along j; the matrix is extended
/// to 2 L1 rows (row r holds s[(r + j L1) mod L]) so that a row shift u
/// never wraps. Stage 1 correlates the DC column of every row of Bob's
/// matrices with it to pick (i, u); stage 2 correlates along j via inverse
/// FFT. Exact ties go to the lowest (i, u, j).
OffsetResult find_offset(const RowDecomposition& rows, const SyncString& s, double tau_B_ps,
                         const FindOffsetOptions& opt = {}, CorrelationTrace* trace = nullptr);

struct AccumulatedString {
  std::vector<std::int8_t> values;
  FrameLayout layout;
  std::size_t K = 0;
  /// Fraction of positions with a nonzero value in at least one input
  /// frame. Counted before the vote, so tied positions still count.
  double fill_fraction = 0.0;
};

/// Position-wise merge of the first K frames: majority vote over nonzero
/// values, exact ties -> 0, all-zero -> 0.
AccumulatedString accumulate_frames(std::span<const ReceivedString> frames, std::size_t K);
RowDecomposition separate_rows(const AccumulatedString& s);

struct HighLossResult {
  OffsetResult offset;
  AccumulatedString accumulated;
};

/// Build K contiguous frame strings starting at `start_ps`, accumulate them
/// and run find_offset. K = 1 reproduces the single-frame path exactly.
HighLossResult recover_offset_highloss(const DetectionStream& stream, const PeriodEstimate& est,
                                       const SyncString& s, const FrameLayout& layout,
                                       std::size_t K, double start_ps,
                                       const FindOffsetOptions& opt = {});

}  // namespace qsync
