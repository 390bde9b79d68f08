#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsync/error.hpp"
#include "qsync/harness.hpp"

namespace {

using qsync::AlignedDetection;
using qsync::Detector;

qsync::FrameSchedule small_schedule() {
  const auto s = qsync::generate_sync_string({10, 10, 1.0, 2});
  return qsync::build_schedule(qsync::build_layout(1, s), s, 2, 5);
}

TEST(Qber, CountsOnlyZSiftedRandomSlots) {
  const auto schedule = small_schedule();
  std::vector<AlignedDetection> aligned;
  std::size_t expect_sifted = 0;
  std::size_t expect_errors = 0;
  for (std::uint64_t slot = 0; slot < schedule.total_pulses(); ++slot) {
    const auto p = schedule.pulse(slot);
    const Detector right = p.polarization;
    const Detector wrong = qsync::encode(p.basis, 1 - p.bit);
    const bool flip = slot % 7 == 0;
    aligned.push_back({static_cast<std::int64_t>(slot), flip ? wrong : right});
    if (p.kind == qsync::SlotKind::random && p.basis == qsync::Basis::Z) {
      ++expect_sifted;
      if (flip) ++expect_errors;
    }
  }
  aligned.push_back({-1, Detector::H});
  aligned.push_back({static_cast<std::int64_t>(schedule.total_pulses()), Detector::V});
  const auto q = qsync::compute_qber(aligned, schedule);
  EXPECT_EQ(q.sifted, expect_sifted);
  EXPECT_EQ(q.errors, expect_errors);
  EXPECT_GT(q.sifted, 50u);
}

TEST(Qber, NothingSiftedThrows) {
  const auto schedule = small_schedule();
  // Slot 0 is a sync slot; X-basis clicks never sift.
  const std::vector<AlignedDetection> aligned{{0, Detector::H}, {1, Detector::D}, {3, Detector::A}};
  try {
    qsync::compute_qber(aligned, schedule);
    ADD_FAILURE() << "expected no_sifted_bits";
  } catch (const qsync::Error& e) {
    EXPECT_EQ(e.code(), qsync::ErrorCode::no_sifted_bits);
  }
}

TEST(Wilson, KnownValues) {
  const auto w = qsync::wilson_interval(8, 10);
  EXPECT_DOUBLE_EQ(w.center, 0.8);
  EXPECT_NEAR(w.lower, 0.4902, 1e-4);
  EXPECT_NEAR(w.upper, 0.9433, 1e-4);
  const auto all = qsync::wilson_interval(100, 100);
  EXPECT_DOUBLE_EQ(all.upper, 1.0);
  EXPECT_NEAR(all.lower, 0.9630, 1e-4);
  const auto none = qsync::wilson_interval(0, 0);
  EXPECT_TRUE(std::isnan(none.center));
}

TEST(Config, JsonRoundTrip) {
  qsync::ExperimentConfig c;
  c.preset = "table1_loss26.5";
  c.scenario = qsync::scenario_presets(c.preset);
  c.scenario.clock.rho = 3e-7;
  c.sync = {200, 50, 0.8, 9};
  c.M = 3;
  c.K = 4;
  c.trials = 12;
  c.seed = 99;
  c.mode = qsync::SyncMode::start_only;
  c.search = qsync::Stage2Search::exhaustive;
  c.delay_compensation = qsync::DelayCompensation::planted;
  c.table2_K = {1, 3};
  c.continuous.duration_s = 2.5;
  const auto back = qsync::config_from_json(qsync::config_to_json(c));
  EXPECT_EQ(qsync::config_to_json(back), qsync::config_to_json(c));
  EXPECT_EQ(back.sync, c.sync);
  EXPECT_EQ(back.mode, qsync::SyncMode::start_only);
  EXPECT_EQ(back.table2_K, c.table2_K);
  EXPECT_DOUBLE_EQ(back.scenario.clock.rho, 3e-7);
}

TEST(Config, PartialDocumentKeepsBase) {
  qsync::ExperimentConfig base;
  base.trials = 7;
  const auto c = qsync::config_from_json(R"({"seed": 3})", base);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.trials, 7u);
}

TEST(Config, Rejections) {
  EXPECT_THROW(qsync::config_from_json(R"({"version": 2})"), qsync::Error);
  EXPECT_THROW(qsync::config_from_json(R"({"trails": 5})"), qsync::Error);
  EXPECT_THROW(qsync::config_from_json(R"({"clock": {"tau": 1}})"), qsync::Error);
  EXPECT_THROW(qsync::config_from_json(R"({"trials": "many"})"), qsync::Error);
  EXPECT_THROW(qsync::config_from_json("{not json"), qsync::Error);
  EXPECT_THROW(qsync::config_from_json(R"({"mode": "sometimes"})"), qsync::Error);
}

TEST(Config, AutoK) {
  qsync::ExperimentConfig c;
  EXPECT_EQ(c.K_for_loss(17.6), 1u);
  EXPECT_EQ(c.K_for_loss(22.7), 1u);
  EXPECT_EQ(c.K_for_loss(26.5), 8u);
  c.K = 3;
  EXPECT_EQ(c.K_for_loss(29.7), 3u);
}

qsync::ExperimentConfig quick_config() {
  qsync::ExperimentConfig c;
  c.sync = {200, 50, 1.0, 1};
  c.delay_compensation = qsync::DelayCompensation::planted;
  c.coarse.n_samples = 1 << 17;  // the FFT window must fit in K + 2 short frames
  return c;
}

TEST(Trial, DeterministicAndScored) {
  const auto cfg = quick_config();
  const auto sync = qsync::experiment_sync_string(cfg);
  const auto delays = qsync::resolve_delays(cfg);
  const auto a = qsync::run_trial(cfg, sync, delays, 17.6, 1, 3);
  const auto b = qsync::run_trial(cfg, sync, delays, 17.6, 1, 3);
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.slot_offset, b.slot_offset);
  EXPECT_EQ(a.tau_B_hat_ps, b.tau_B_hat_ps);
  EXPECT_EQ(a.sifted, b.sifted);
  EXPECT_TRUE(a.error.empty()) << a.error;
  EXPECT_TRUE(a.success_truth);
  EXPECT_EQ(a.slot_offset, a.true_offset);
  EXPECT_LT(a.qber, 0.05);
  EXPECT_NE(qsync::run_trial(cfg, sync, delays, 17.6, 1, 4).seed, a.seed);
}

TEST(Trial, ThresholdSuccessImpliesTruthAtModerateLoss) {
  qsync::ExperimentConfig cfg;
  cfg.delay_compensation = qsync::DelayCompensation::planted;
  const auto sync = qsync::experiment_sync_string(cfg);
  const auto delays = qsync::resolve_delays(cfg);
  std::size_t checked = 0;
  std::size_t claimed = 0;
  for (double loss : {17.6, 20.0, 22.7, 25.0}) {
    for (std::size_t t = 0; t < 50; ++t) {
      const auto r = qsync::run_trial(cfg, sync, delays, loss, 1, t);
      claimed += r.success_threshold;
      if (r.success_threshold) {
        EXPECT_TRUE(r.success_truth) << loss << " trial " << t;
      }
      ++checked;
    }
  }
  EXPECT_EQ(checked, 200u);
  EXPECT_GT(claimed, 100u);
}

TEST(Table, SmallRunAndCsv) {
  auto cfg = quick_config();
  cfg.trials = 4;
  cfg.table1_losses = {17.6, 20.0};
  const auto r = qsync::run_table1(cfg);
  ASSERT_EQ(r.cells.size(), 2u);
  ASSERT_EQ(r.trials.size(), 8u);
  for (const auto& c : r.cells) {
    EXPECT_EQ(c.trials, 4u);
    EXPECT_EQ(c.successes_truth, 4u);
    EXPECT_LT(c.qber, 0.02);
    EXPECT_LT(c.tau_B_rel_error_max, 1e-6);
  }
  std::ostringstream trials;
  std::ostringstream summary;
  qsync::write_trials_csv(trials, r, false);
  qsync::write_summary_csv(summary, r);
  EXPECT_EQ(trials.str().rfind("loss_db,K,trial,seed,", 0), 0u);
  EXPECT_EQ(trials.str().find("runtime_ms"), std::string::npos);
  const std::string text = summary.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

}  // namespace
