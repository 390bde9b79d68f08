// Acceptance run: one PASS/FAIL line per criterion. Arguments select a
// subset of criteria by number; no arguments runs all eight.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qsync/harness.hpp"
#include "qsync/reference.hpp"
#include "qsync/rng.hpp"

namespace {

using namespace qsync;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome sync_statistics() {
  const std::size_t seeds = 20;
  const SyncStringParams base{1000, 100, 1.0, 0};
  const std::size_t L = base.length();
  std::vector<double> mean(L, 0.0);
  double worst_single = 0.0;
  for (std::size_t k = 0; k < seeds; ++k) {
    SyncStringParams p = base;
    p.seed = 1000 + k;
    const auto x = autocorrelation_all(generate_sync_string(p));
    for (std::size_t m = 0; m < L; ++m) {
      mean[m] += x[m] / static_cast<double>(seeds);
      if (m % base.L1 != 0) worst_single = std::max(worst_single, std::abs(x[m]));
    }
  }
  double peak = 0.0;
  for (std::size_t j = 1; j < base.N1; ++j) peak += mean[j * base.L1];
  peak /= static_cast<double>(base.N1 - 1);
  double off = 0.0;
  for (std::size_t m = 1; m < L; ++m)
    if (m % base.L1 != 0) off = std::max(off, std::abs(mean[m]));
  const double bound = 5.0 / std::sqrt(static_cast<double>(L));
  return {std::abs(peak - 1.0 / 3.0) <= 0.02 && off < bound,
          fmt("mean peak %.4f (target 0.3333 +- 0.02), seed-mean max |off-peak| %.4f < %.4f; "
              "largest single-seed |off-peak| %.4f",
              peak, off, bound, worst_single)};
}

Outcome oracle_equivalence() {
  const std::size_t cases = 200;
  std::size_t agree = 0;
  std::size_t fast_agree = 0;
  std::size_t total = 0;
  Scenario sc = scenario_presets("table1_loss20.0");
  sc.clock.rho = 0.0;
  sc.delays = {};
  const std::vector<std::pair<std::size_t, std::size_t>> shapes{{8, 8}, {16, 16}, {32, 16}};
  std::uint64_t case_id = 0;
  for (auto [L1, N1] : shapes) {
    for (std::size_t M : {1u, 3u}) {
      for (std::size_t c = 0; c < cases; ++c, ++case_id) {
        const CounterRng rng{derive_seed(2024, case_id)};
        const auto s = generate_sync_string({L1, N1, 1.0, case_id});
        const auto layout = build_layout(M, s);
        const std::uint64_t nf = layout.frame_length();
        const std::uint64_t begin = rng.bits(0, 0) % nf;
        sc.channel.loss_db = 20.0 * rng.uniform(0, 1);
        const FrameSchedule schedule(layout, s, 2, derive_seed(case_id, 1));
        const auto stream =
            transmit(schedule, sc.clock, sc.channel, sc.delays, derive_seed(case_id, 2),
                     {begin, begin + nf});
        PeriodEstimate est;
        est.tau_B_ps = est.tau_B0_ps = sc.clock.tau_A_ps;
        const double start = sc.clock.t0_ps + static_cast<double>(begin) * sc.clock.tau_A_ps;
        const auto received = build_received_string(stream, est, start, layout);
        const auto rows = separate_rows(received);
        const auto direct = reference::direct_correlation_argmax(received.values, s, layout);
        const auto exact = find_offset(rows, s, est.tau_B_ps, {Stage2Search::exhaustive, 5.0});
        const auto fast = find_offset(rows, s, est.tau_B_ps);
        agree += exact.slot_offset == direct.delta && exact.peak == direct.value;
        fast_agree += fast.slot_offset == direct.delta;
        ++total;
      }
    }
  }
  return {agree == total,
          fmt("exhaustive search matches brute force in %.0f/%.0f cases; two-stage fast "
              "search matches in %.0f",
              static_cast<double>(agree), static_cast<double>(total),
              static_cast<double>(fast_agree))};
}

Outcome period_recovery() {
  const std::size_t trials = 50;
  Scenario sc = scenario_presets("table1_loss20.0");
  sc.delays = {};
  const auto s = generate_sync_string({1000, 100, 1.0, 1});
  const auto layout = build_layout(1, s);
  const std::size_t frames = 110;
  std::size_t ok = 0;
  std::size_t min_det = SIZE_MAX;
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const FrameSchedule schedule(layout, s, frames, derive_seed(31, t));
    const auto stream =
        transmit(schedule, sc.clock, sc.channel, sc.delays, derive_seed(32, t));
    min_det = std::min(min_det, stream.size());
    try {
      const auto est = recover_period(stream, sc.clock.tau_A_ps);
      const double rel = std::abs(est.tau_B_ps / sc.clock.tau_B_ps() - 1.0);
      worst = std::max(worst, rel);
      ok += rel < 1e-9;
    } catch (const std::exception&) {
      worst = INFINITY;
    }
  }
  return {ok * 100 >= 95 * trials && min_det >= 100000,
          fmt("%.0f/%.0f trials with |tau_hat/tau - 1| < 1e-9 (worst %.2e), fewest detections %.0f",
              static_cast<double>(ok), static_cast<double>(trials), worst,
              static_cast<double>(min_det))};
}

Outcome path_delays() {
  ExperimentConfig cfg;
  cfg.preset = "fig4_delays";
  cfg.scenario = scenario_presets(cfg.preset);
  cfg.trials = 50;
  const auto trials = run_delay_estimation(cfg);
  std::size_t ok = 0;
  double worst = 0.0;
  for (const auto& t : trials) {
    const bool good = t.error.empty() && t.max_abs_error_ps <= 50.0;
    ok += good;
    worst = std::max(worst, t.error.empty() ? t.max_abs_error_ps : INFINITY);
  }
  return {ok * 100 >= 95 * trials.size(),
          fmt("%.0f/%.0f trials within 50 ps of {0, 650, 1480, 1010} ps (worst %.1f ps)",
              static_cast<double>(ok), static_cast<double>(trials.size()), worst)};
}

Outcome table1() {
  ExperimentConfig cfg;
  cfg.trials = 50;
  const auto r = run_table1(cfg);
  bool pass = true;
  std::ostringstream d;
  for (const auto& c : r.cells) {
    const bool good = c.p_s_truth.center >= 0.9 && c.qber < 0.01;
    pass = pass && good;
    d << fmt("[%.1f dB K=%.0f P_s %.2f QBER %.3f%%] ", c.loss_db, static_cast<double>(c.K),
             c.p_s_truth.center, 100.0 * c.qber);
  }
  return {pass, d.str()};
}

Outcome table2() {
  ExperimentConfig cfg;
  cfg.trials = 100;
  const auto r = run_table2(cfg);
  bool pass = true;
  std::ostringstream d;
  for (double loss : cfg.table2_losses) {
    std::vector<const CellSummary*> row;
    for (const auto& c : r.cells)
      if (c.loss_db == loss) row.push_back(&c);
    bool monotone = true;
    for (std::size_t k = 1; k < row.size(); ++k)
      monotone = monotone && row[k]->p_s_truth.center >= row[k - 1]->p_s_truth.center;
    const CellSummary& k1 = *row.front();
    const CellSummary& k8 = *row.back();
    const bool separated = k1.p_s_truth.upper < k8.p_s_truth.lower;
    const bool endpoint = k8.p_s_truth.center >= 0.9;
    const bool qber = k8.qber_mean < 0.02;
    pass = pass && monotone && separated && endpoint && qber;
    d << fmt("[%.1f dB P_s", loss);
    for (const auto* c : row) d << fmt(" K%.0f=%.2f", static_cast<double>(c->K), c->p_s_truth.center);
    d << fmt("; K1 upper %.3f vs K8 lower %.3f; K8 mean QBER %.3f%%", k1.p_s_truth.upper,
             k8.p_s_truth.lower, 100.0 * k8.qber_mean);
    d << (monotone ? "" : " NOT-MONOTONE") << (separated ? "" : " NOT-SEPARATED")
      << (endpoint ? "" : " LOW-ENDPOINT") << (qber ? "" : " HIGH-QBER") << "] ";
  }
  return {pass, d.str()};
}

Outcome continuous() {
  ExperimentConfig cfg;
  cfg.preset = "continuous";
  cfg.scenario = scenario_presets(cfg.preset);
  cfg.continuous.duration_s = 10.0;
  const auto r = run_continuous_comparison(cfg);
  const double gate = 3.0 * cfg.gate().sigma_g_ps;
  bool dist_ok = !r.distributed.empty();
  double dist_err = 0.0;
  double dist_qber = 0.0;
  for (const auto& w : r.distributed) {
    const bool good = w.error.empty() && w.offset_success && w.qber < 0.01 &&
                      std::abs(w.time_error_ps) < gate;
    dist_ok = dist_ok && good;
    dist_err = std::max(dist_err, std::abs(w.time_error_ps));
    dist_qber = std::max(dist_qber, w.qber);
  }
  double late_qber = 0.0;
  double late_err = 0.0;
  if (r.horizon_window) {
    for (const auto& w : r.start_only) {
      if (w.window < *r.horizon_window) continue;
      late_qber = std::max(late_qber, w.qber);
      late_err = std::max(late_err, std::abs(w.time_error_ps));
    }
  }
  const bool start_fails = r.horizon_window && late_qber >= 0.4 && late_err >= 5000.0;
  const double horizon_s = r.horizon_window && *r.horizon_window < r.start_only.size()
                               ? r.start_only[*r.horizon_window].t_s
                               : NAN;
  return {dist_ok && start_fails,
          fmt("distributed: max |time error| %.1f ps (< %.0f), max QBER %.3f%%; ", dist_err, gate,
              100.0 * dist_qber) +
              fmt("start_only: horizon at %.2f s, then max QBER %.1f%% and |time error| %.2f ns",
                  horizon_s, 100.0 * late_qber, late_err / 1000.0)};
}

Outcome determinism() {
  ExperimentConfig cfg;
  cfg.seed = 7;
  std::ostringstream a;
  std::ostringstream b;
  const auto r1 = run_table2(cfg);
  write_trials_csv(a, r1, false);
  write_summary_csv(a, r1);
  const auto r2 = run_table2(cfg);
  write_trials_csv(b, r2, false);
  write_summary_csv(b, r2);
  return {a.str() == b.str() && !a.str().empty(),
          fmt("two table2 runs with seed 7 (%.0f trials per cell): %.0f bytes, identical=%.0f",
              static_cast<double>(cfg.trials), static_cast<double>(a.str().size()),
              a.str() == b.str() ? 1.0 : 0.0)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "sync-string statistics", sync_statistics},
      {2, "oracle equivalence", oracle_equivalence},
      {3, "period recovery", period_recovery},
      {4, "path delays", path_delays},
      {5, "table1 experiment", table1},
      {6, "table2 experiment", table2},
      {7, "continuous-run comparison", continuous},
      {8, "pipeline determinism", determinism},
  };
  std::set<int> selected;
  for (int a = 1; a < argc; ++a) selected.insert(std::atoi(argv[a]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("criterion %d %s: %s (%.1f s) %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
