#include "qsync/offset_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "qsync/error.hpp"
#include "qsync/fft.hpp"

namespace qsync {

ReceivedString build_received_string(const DetectionStream& stream, const PeriodEstimate& est,
                                     double start_ps, const FrameLayout& layout,
                                     std::size_t n_slots) {
  if (!(est.tau_B_ps > 0.0)) throw Error(ErrorCode::invalid_argument, "invalid period estimate");
  if (n_slots == 0) n_slots = layout.frame_length();
  const double tau = est.tau_B_ps;
  ReceivedString out;
  out.layout = layout;
  out.start_slot_time_ps = start_ps;
  // Bit 0: H seen, bit 1: V seen.
  std::vector<std::uint8_t> seen(n_slots, 0);

  const double lo = start_ps - tau / 2;
  const double hi = start_ps + (static_cast<double>(n_slots) - 0.5) * tau;
  auto it = std::lower_bound(stream.begin(), stream.end(), lo,
                             [](const DetectionRecord& r, double t) {
                               return static_cast<double>(r.t_ps) < t;
                             });
  for (; it != stream.end(); ++it) {
    const double t = static_cast<double>(it->t_ps);
    if (t > hi + tau) break;
    const double p = std::nearbyint((t - start_ps) / tau);
    if (p < 0 || p >= static_cast<double>(n_slots)) {
      ++out.skipped;
      continue;
    }
    const auto slot = static_cast<std::size_t>(p);
    if (it->detector == Detector::H) seen[slot] |= 1U;
    if (it->detector == Detector::V) seen[slot] |= 2U;
  }
  out.values.assign(n_slots, 0);
  for (std::size_t i = 0; i < n_slots; ++i) {
    switch (seen[i]) {
      case 1: out.values[i] = 1; break;
      case 2: out.values[i] = -1; break;
      case 3: ++out.conflicts; break;
      default: break;
    }
  }
  return out;
}

RowDecomposition separate_rows(std::span<const std::int8_t> values, const FrameLayout& layout) {
  if (values.size() != layout.frame_length())
    throw Error(ErrorCode::layout_mismatch, "string length differs from (M+1) L");
  RowDecomposition d;
  d.layout = layout;
  const std::size_t stride = layout.stride();
  d.rows.assign(stride, std::vector<std::int8_t>(layout.L));
  for (std::size_t c = 0; c < layout.L; ++c)
    for (std::size_t i = 0; i < stride; ++i) d.rows[i][c] = values[c * stride + i];
  return d;
}

RowDecomposition separate_rows(const ReceivedString& s) { return separate_rows(s.values, s.layout); }
RowDecomposition separate_rows(const AccumulatedString& s) {
  return separate_rows(s.values, s.layout);
}

namespace {

using fft::cd;

// Row-major 2*L1 x N1 matrix of the extended sync string,
// A2[r][j] = s[(r + j L1) mod L].
std::vector<cd> extended_sync_matrix(const SyncString& s) {
  const std::size_t L1 = s.params.L1, N1 = s.params.N1, L = s.size();
  std::vector<cd> a(2 * L1 * N1);
  for (std::size_t r = 0; r < 2 * L1; ++r)
    for (std::size_t j = 0; j < N1; ++j) a[r * N1 + j] = s.bits[(r + j * L1) % L];
  return a;
}

// Bob row as an L1 x N1 matrix, B[u][j] = row[u + j L1], padded to `rows` rows.
std::vector<cd> bob_matrix(std::span<const std::int8_t> row, std::size_t L1, std::size_t N1,
                           std::size_t rows) {
  std::vector<cd> b(rows * N1);
  for (std::size_t u = 0; u < L1; ++u)
    for (std::size_t j = 0; j < N1; ++j) b[u * N1 + j] = row[u + j * L1];
  return b;
}

// Convert the matrix-domain shift (du, dj), meaning Bob row u lines up with
// extended row u + du shifted by dj, to the reported (u, j) of the column
// lag q = u + j L1 where Bob's column c + q carries sync bit c.
std::pair<std::size_t, std::size_t> to_reported(std::size_t du, std::size_t dj, std::size_t L1,
                                                std::size_t N1) {
  if (du == 0) return {0, (N1 - dj) % N1};
  return {L1 - du, N1 - 1 - dj};
}

std::int64_t to_int(double v) { return static_cast<std::int64_t>(std::llround(v)); }

// Circular cross-correlation over u of Bob's DC column (length L1) against
// the extended DC column (length 2 L1): X[du] = sum_u dcB[u] dcA2[u + du].
std::vector<std::int64_t> dc_correlation(const std::vector<double>& dc_bob,
                                         const std::vector<double>& dc_sync2) {
  const std::size_t n = dc_sync2.size();
  const std::size_t L1 = dc_bob.size();
  std::vector<cd> b(n), a(n);
  for (std::size_t u = 0; u < L1; ++u) b[u] = dc_bob[u];
  for (std::size_t r = 0; r < n; ++r) a[r] = dc_sync2[r];
  fft::transform(b, fft::Direction::forward);
  fft::transform(a, fft::Direction::forward);
  for (std::size_t k = 0; k < n; ++k) b[k] = std::conj(b[k]) * a[k];
  fft::transform(b, fft::Direction::inverse);
  std::vector<std::int64_t> out(L1);
  for (std::size_t du = 0; du < L1; ++du) out[du] = to_int(b[du].real() / static_cast<double>(n));
  return out;
}

struct Pick {
  std::size_t i = 0, u = 0, j = 0;
  std::int64_t value = 0;
  bool valid = false;

  bool better_than(const Pick& o) const {
    if (!o.valid) return true;
    if (value != o.value) return value > o.value;
    return std::tie(i, u, j) < std::tie(o.i, o.u, o.j);
  }
};

double confidence_of(const std::vector<std::int64_t>& arr, std::int64_t peak) {
  if (arr.size() < 2) return 0.0;
  double mean = 0.0;
  for (auto v : arr) mean += static_cast<double>(v);
  mean /= static_cast<double>(arr.size());
  double var = 0.0;
  for (auto v : arr) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  var /= static_cast<double>(arr.size());
  if (var <= 0.0) return 0.0;
  return (static_cast<double>(peak) - mean) / std::sqrt(var);
}

// Horizontal correlation at one matrix shift du:
// X[dj] = sum_u sum_j B[u][j] A2[u + du][(j + dj) mod N1], via FFT along j.
std::vector<std::int64_t> horizontal_correlation(const std::vector<cd>& fb,
                                                 const std::vector<cd>& fa2, std::size_t du,
                                                 std::size_t L1, std::size_t N1) {
  std::vector<cd> acc(N1, cd{});
  for (std::size_t u = 0; u < L1; ++u) {
    const cd* brow = &fb[u * N1];
    const cd* arow = &fa2[(u + du) * N1];
    for (std::size_t k = 0; k < N1; ++k) acc[k] += std::conj(brow[k]) * arow[k];
  }
  fft::transform(acc, fft::Direction::inverse);
  std::vector<std::int64_t> out(N1);
  for (std::size_t dj = 0; dj < N1; ++dj) out[dj] = to_int(acc[dj].real() / static_cast<double>(N1));
  return out;
}

}  // namespace

OffsetResult find_offset(const RowDecomposition& rows, const SyncString& s, double tau_B_ps,
                         const FindOffsetOptions& opt, CorrelationTrace* trace) {
  const FrameLayout& layout = rows.layout;
  const std::size_t L1 = s.params.L1, N1 = s.params.N1, L = s.size();
  if (L1 * N1 != L || layout.L != L)
    throw Error(ErrorCode::layout_mismatch, "sync string does not match the frame layout");
  if (rows.rows.size() != layout.stride())
    throw Error(ErrorCode::layout_mismatch, "row count differs from M + 1");
  for (const auto& r : rows.rows)
    if (r.size() != L) throw Error(ErrorCode::layout_mismatch, "row length differs from L");

  OffsetResult result;
  const bool degenerate = std::all_of(rows.rows.begin(), rows.rows.end(), [](const auto& r) {
    return std::all_of(r.begin(), r.end(), [](std::int8_t v) { return v == 0; });
  });
  if (degenerate) {
    if (trace) *trace = {};
    return result;
  }

  // Sync-side transforms, shared by all rows.
  const std::vector<cd> a2 = extended_sync_matrix(s);
  std::vector<double> dc_a2(2 * L1, 0.0);
  for (std::size_t r = 0; r < 2 * L1; ++r)
    for (std::size_t j = 0; j < N1; ++j) dc_a2[r] += a2[r * N1 + j].real();
  std::vector<cd> fa2 = a2;
  fft::transform_rows(fa2, 2 * L1, N1, fft::Direction::forward);

  // Stage 1: DC column correlation per row.
  const std::size_t n_rows = rows.rows.size();
  std::vector<std::vector<std::int64_t>> stage1(n_rows);
  std::vector<std::vector<cd>> fb(n_rows);
  Pick best1;
  for (std::size_t i = 0; i < n_rows; ++i) {
    fb[i] = bob_matrix(rows.rows[i], L1, N1, L1);
    std::vector<double> dc_b(L1, 0.0);
    for (std::size_t u = 0; u < L1; ++u)
      for (std::size_t j = 0; j < N1; ++j) dc_b[u] += fb[i][u * N1 + j].real();
    stage1[i] = dc_correlation(dc_b, dc_a2);
    for (std::size_t du = 0; du < L1; ++du) {
      Pick p{i, to_reported(du, 0, L1, N1).first, 0, stage1[i][du], true};
      if (p.better_than(best1)) best1 = p;
    }
    fft::transform_rows(fb[i], L1, N1, fft::Direction::forward);
  }
  auto du_of = [&](std::size_t u) { return u == 0 ? 0 : L1 - u; };

  Pick best;
  if (opt.search == Stage2Search::stage1_optimum) {
    const std::size_t du = du_of(best1.u);
    const auto x2 = horizontal_correlation(fb[best1.i], fa2, du, L1, N1);
    for (std::size_t dj = 0; dj < N1; ++dj) {
      const auto [u, j] = to_reported(du, dj, L1, N1);
      Pick p{best1.i, u, j, x2[dj], true};
      if (p.better_than(best)) best = p;
    }
  } else {
    // Full 2-D correlation per row: Bob's matrix zero-padded to 2 L1 rows
    // against the extended sync matrix; shifts du < L1 never wrap.
    std::vector<cd> fa2_2d = a2;
    fft::transform_2d(fa2_2d, 2 * L1, N1, fft::Direction::forward);
    const double norm = static_cast<double>(2 * L1 * N1);
    for (std::size_t i = 0; i < n_rows; ++i) {
      std::vector<cd> b = bob_matrix(rows.rows[i], L1, N1, 2 * L1);
      fft::transform_2d(b, 2 * L1, N1, fft::Direction::forward);
      for (std::size_t k = 0; k < b.size(); ++k) b[k] = std::conj(b[k]) * fa2_2d[k];
      fft::transform_2d(b, 2 * L1, N1, fft::Direction::inverse);
      for (std::size_t du = 0; du < L1; ++du)
        for (std::size_t dj = 0; dj < N1; ++dj) {
          const auto [u, j] = to_reported(du, dj, L1, N1);
          Pick p{i, u, j, to_int(b[du * N1 + dj].real() / norm), true};
          if (p.better_than(best)) best = p;
        }
    }
  }

  // Confidence from the horizontal array at the chosen (i, u).
  const std::size_t du = du_of(best.u);
  const auto x2 = horizontal_correlation(fb[best.i], fa2, du, L1, N1);

  result.i_opt = static_cast<int>(best.i) + 1;
  result.u_opt = best.u;
  result.j_opt = best.j;
  result.slot_offset = best.i + layout.stride() * (best.u + L1 * best.j);
  result.offset_ps = tau_B_ps * static_cast<double>(result.slot_offset);
  result.peak = best.value;
  result.stage1_peak = stage1[best.i][du];
  result.confidence = confidence_of(x2, best.value);
  result.success = result.confidence >= opt.success_threshold;

  if (trace) {
    trace->stage1.assign(n_rows, std::vector<std::int64_t>(L1));
    for (std::size_t i = 0; i < n_rows; ++i)
      for (std::size_t d = 0; d < L1; ++d)
        trace->stage1[i][to_reported(d, 0, L1, N1).first] = stage1[i][d];
    trace->stage2.assign(N1, 0);
    for (std::size_t dj = 0; dj < N1; ++dj) trace->stage2[to_reported(du, dj, L1, N1).second] = x2[dj];
  }
  return result;
}

AccumulatedString accumulate_frames(std::span<const ReceivedString> frames, std::size_t K) {
  if (K == 0 || frames.size() < K)
    throw Error(ErrorCode::invalid_argument, "need at least K >= 1 frame strings");
  const FrameLayout layout = frames[0].layout;
  const std::size_t n = frames[0].values.size();
  for (std::size_t f = 0; f < K; ++f)
    if (!(frames[f].layout == layout) || frames[f].values.size() != n)
      throw Error(ErrorCode::layout_mismatch, "frame strings differ in layout");
  AccumulatedString out;
  out.layout = layout;
  out.K = K;
  out.values.assign(n, 0);
  std::size_t filled = 0;
  for (std::size_t p = 0; p < n; ++p) {
    int vote = 0;
    for (std::size_t f = 0; f < K; ++f) vote += frames[f].values[p];
    out.values[p] = static_cast<std::int8_t>((vote > 0) - (vote < 0));
    bool any = false;
    for (std::size_t f = 0; f < K && !any; ++f) any = frames[f].values[p] != 0;
    filled += any;
  }
  out.fill_fraction = n ? static_cast<double>(filled) / static_cast<double>(n) : 0.0;
  return out;
}

HighLossResult recover_offset_highloss(const DetectionStream& stream, const PeriodEstimate& est,
                                       const SyncString& s, const FrameLayout& layout,
                                       std::size_t K, double start_ps,
                                       const FindOffsetOptions& opt) {
  if (K == 0) throw Error(ErrorCode::invalid_argument, "K must be >= 1");
  std::vector<ReceivedString> frames;
  frames.reserve(K);
  const double frame_ps = static_cast<double>(layout.frame_length()) * est.tau_B_ps;
  for (std::size_t k = 0; k < K; ++k)
    frames.push_back(
        build_received_string(stream, est, start_ps + static_cast<double>(k) * frame_ps, layout));
  HighLossResult out;
  out.accumulated = accumulate_frames(frames, K);
  out.offset = find_offset(separate_rows(out.accumulated), s, est.tau_B_ps, opt);
  return out;
}

}  // namespace qsync
