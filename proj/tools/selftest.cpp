#include "selftest.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "qsync/error.hpp"
#include "qsync/framing.hpp"
#include "qsync/harness.hpp"
#include "qsync/io.hpp"
#include "qsync/lts.hpp"
#include "qsync/offset_recovery.hpp"
#include "qsync/reference.hpp"
#include "qsync/rng.hpp"
#include "qsync/sync_string.hpp"

namespace qsync::tools {
namespace {

// Bob's frame string for a known offset: Alice's frame rotated by `delta`,
// with each nonzero entry kept with probability `keep` and flipped with
// probability `flip`.
std::vector<std::int8_t> synthetic_received(const SyncString& s, const FrameLayout& layout,
                                            std::size_t delta, double keep, double flip,
                                            const CounterRng& rng, std::uint64_t stream) {
  const std::size_t nf = layout.frame_length();
  std::vector<std::int8_t> b(nf, 0);
  for (std::size_t n = 0; n < nf; ++n) {
    const std::size_t pos = (n + delta) % nf;
    std::int8_t v = 0;
    if (layout.is_sync_slot(n))
      v = s[n / layout.stride()];
    else
      v = (rng.bits(stream, 3 * n) & 1) ? 1 : -1;
    if (rng.uniform(stream, 3 * n + 1) >= keep) v = 0;
    if (rng.uniform(stream, 3 * n + 2) < flip) v = static_cast<std::int8_t>(-v);
    b[pos] = v;
  }
  return b;
}

bool check_autocorrelation(std::uint64_t seed, std::string& detail) {
  const SyncString s = generate_sync_string({64, 16, 1.0, seed});
  const auto all = autocorrelation_all(s);
  double worst = 0.0;
  for (std::size_t lag = 0; lag < s.size(); ++lag)
    worst = std::max(worst, std::abs(all[lag] - reference::autocorrelation(s.view(), lag)));
  detail = "max |fft - direct| = " + std::to_string(worst);
  return worst < 1e-9;
}

bool check_offsets(std::uint64_t seed, std::size_t cases, std::string& detail) {
  const CounterRng rng{seed};
  std::size_t agree = 0, total = 0;
  const std::size_t shapes[][2] = {{16, 4}, {32, 8}, {64, 8}};
  for (std::size_t c = 0; c < cases; ++c) {
    const auto& sh = shapes[c % 3];
    const SyncString s = generate_sync_string({sh[0], sh[1], 1.0, seed + c});
    const FrameLayout layout = build_layout(1 + 2 * (c % 2), s);
    const std::size_t delta = rng.bits(10, c) % layout.frame_length();
    const double keep = 0.05 + 0.9 * rng.uniform(11, c);
    const auto b = synthetic_received(s, layout, delta, keep, 0.05, rng, 100 + c);
    const auto direct = reference::direct_correlation_argmax(b, s, layout);
    const OffsetResult fast =
        find_offset(separate_rows(b, layout), s, 1.0, {Stage2Search::exhaustive, 5.0});
    ++total;
    agree += fast.slot_offset == direct.delta && fast.i_opt == direct.i &&
             fast.u_opt == direct.u && fast.j_opt == direct.j && fast.peak == direct.value;
  }
  detail = std::to_string(agree) + "/" + std::to_string(total) + " argmax matches";
  return agree == total;
}

bool check_clean_recovery(std::uint64_t seed, std::string& detail) {
  const CounterRng rng{seed};
  std::size_t ok = 0, total = 0;
  for (std::size_t c = 0; c < 20; ++c) {
    const SyncString s = generate_sync_string({100, 10, 1.0, seed + c});
    const FrameLayout layout = build_layout(1, s);
    const std::size_t delta = rng.bits(20, c) % layout.frame_length();
    const auto b = synthetic_received(s, layout, delta, 1.0, 0.0, rng, 200 + c);
    for (Stage2Search mode : {Stage2Search::stage1_optimum, Stage2Search::exhaustive}) {
      ++total;
      ok += find_offset(separate_rows(b, layout), s, 1.0, {mode, 5.0}).slot_offset == delta;
    }
  }
  detail = std::to_string(ok) + "/" + std::to_string(total) + " noiseless offsets recovered";
  return ok == total;
}

bool check_lts(std::string& detail) {
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(i);
    y.push_back(i % 5 == 0 ? 1e4 + i : 3.0 - 0.25 * i);
  }
  const LineFit f = lts_fit(x, y);
  detail = "slope " + std::to_string(f.slope) + " intercept " + std::to_string(f.intercept);
  return std::abs(f.slope + 0.25) < 1e-12 && std::abs(f.intercept - 3.0) < 1e-9;
}

bool check_roundtrip(std::uint64_t seed, std::string& detail) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("qsync_selftest_" + std::to_string(mix64(seed)));
  std::filesystem::create_directories(dir);
  const SyncString s = generate_sync_string({50, 20, 0.8, seed});
  io::write_sync_string(dir / "a.bin", s);
  const SyncString back = io::read_sync_string(dir / "a.bin");
  io::write_sync_string(dir / "b.bin", back);
  const bool same_bits = back.bits == s.bits && back.params == s.params;
  const bool same_bytes = io::read_text(dir / "a.bin") == io::read_text(dir / "b.bin");
  std::filesystem::remove_all(dir);
  detail = same_bits && same_bytes ? "byte-exact" : "mismatch";
  return same_bits && same_bytes;
}

bool check_qber(std::uint64_t seed, std::string& detail) {
  const SyncString s = generate_sync_string({32, 4, 1.0, seed});
  const FrameSchedule sched = build_schedule(build_layout(3, s), s, 2, seed);
  std::vector<AlignedDetection> exact, shifted;
  for (std::uint64_t slot = 1; slot + 1 < sched.total_pulses(); ++slot) {
    const PulseRecord p = sched.pulse(slot);
    exact.push_back({static_cast<std::int64_t>(slot), p.polarization});
    shifted.push_back({static_cast<std::int64_t>(slot + 1), p.polarization});
  }
  const double q0 = compute_qber(exact, sched).qber();
  const double q1 = compute_qber(shifted, sched).qber();
  detail = "aligned " + std::to_string(q0) + ", shifted " + std::to_string(q1);
  return q0 == 0.0 && std::abs(q1 - 0.5) < 0.1;
}

}  // namespace

bool run_selftest(std::ostream& out, std::uint64_t seed, std::size_t offset_cases) {
  struct Check {
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Check> checks{
      {"autocorrelation_fft_vs_direct", [&](std::string& d) { return check_autocorrelation(seed, d); }},
      {"find_offset_vs_direct_argmax",
       [&](std::string& d) { return check_offsets(seed, offset_cases, d); }},
      {"noiseless_offset_both_searches", [&](std::string& d) { return check_clean_recovery(seed, d); }},
      {"lts_ignores_outliers", [&](std::string& d) { return check_lts(d); }},
      {"sync_file_roundtrip", [&](std::string& d) { return check_roundtrip(seed, d); }},
      {"qber_aligned_and_shifted", [&](std::string& d) { return check_qber(seed, d); }},
  };
  bool all = true;
  for (const Check& c : checks) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    out << (ok ? "PASS " : "FAIL ") << c.name << " (" << detail << ")\n";
    all = all && ok;
  }
  return all;
}

}  // namespace qsync::tools
