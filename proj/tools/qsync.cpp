// qsync command-line front end: gen, simulate, recover, experiment, selftest.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "qsync/channel.hpp"
#include "qsync/clock_recovery.hpp"
#include "qsync/error.hpp"
#include "qsync/harness.hpp"
#include "qsync/io.hpp"
#include "qsync/offset_recovery.hpp"
#include "qsync/rng.hpp"
#include "qsync/sync_string.hpp"
#include "selftest.hpp"

namespace {

using nlohmann::json;

// Write to `path`, or stdout when path is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw qsync::Error(qsync::ErrorCode::io_error, "cannot open " + path);
  write(out);
}

struct ExperimentArgs {
  std::string which;
  std::string config_path;
  std::optional<std::size_t> trials, K, threads, M;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> search, mode, preset;
  std::optional<double> duration_s;
  std::string out_csv, trials_csv, summary_json;
  bool timing = false;
};

qsync::ExperimentConfig resolve_config(const ExperimentArgs& a) {
  qsync::ExperimentConfig cfg;
  if (!a.config_path.empty()) cfg = qsync::load_config(a.config_path);
  json over = json::object();
  if (a.preset) over["preset"] = *a.preset;
  if (a.trials) over["trials"] = *a.trials;
  if (a.K) over["K"] = *a.K;
  if (a.M) over["M"] = *a.M;
  if (a.seed) over["seed"] = *a.seed;
  if (a.threads) over["threads"] = *a.threads;
  if (a.search) over["search"] = *a.search;
  if (a.mode) over["mode"] = *a.mode;
  if (a.duration_s) over["continuous"] = {{"duration_s", *a.duration_s}};
  cfg = qsync::config_from_json(over.dump(), cfg);
  cfg.timing = a.timing;
  return cfg;
}

int run_experiment(const ExperimentArgs& a) {
  const qsync::ExperimentConfig cfg = resolve_config(a);
  if (a.which == "table1" || a.which == "table2") {
    const qsync::ExperimentResult r =
        a.which == "table1" ? qsync::run_table1(cfg) : qsync::run_table2(cfg);
    emit(a.out_csv, [&](std::ostream& o) { qsync::write_summary_csv(o, r); });
    if (!a.trials_csv.empty())
      emit(a.trials_csv, [&](std::ostream& o) { qsync::write_trials_csv(o, r, cfg.timing); });
    if (!a.summary_json.empty())
      emit(a.summary_json, [&](std::ostream& o) { o << qsync::summary_json(r, cfg) << '\n'; });
    return 0;
  }
  if (a.which == "continuous") {
    const qsync::ContinuousResult r = qsync::run_continuous_comparison(cfg);
    emit(a.out_csv, [&](std::ostream& o) { qsync::write_continuous_csv(o, r); });
    if (!a.summary_json.empty())
      emit(a.summary_json, [&](std::ostream& o) {
        json j;
        j["tau_B_ps"] = r.tau_B_ps;
        j["horizon_window"] = r.horizon_window ? json(*r.horizon_window) : json(nullptr);
        j["windows"] = r.distributed.size();
        o << j.dump(2) << '\n';
      });
    return 0;
  }
  if (a.which == "delays") {
    qsync::ExperimentConfig c = cfg;
    if (!a.preset && a.config_path.empty()) c.scenario = qsync::scenario_presets("fig4_delays");
    const auto trials = qsync::run_delay_estimation(c);
    emit(a.out_csv, [&](std::ostream& o) { qsync::write_delays_csv(o, trials); });
    return 0;
  }
  throw CLI::ValidationError("experiment", "unknown experiment '" + a.which + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsync: qubit-based distributed frame synchronization"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Write a sync string and optionally a pulse schedule");
  qsync::SyncStringParams sp;
  std::string gen_out = "sync.bin", gen_schedule;
  std::size_t gen_M = 1, gen_frames = 1;
  std::uint64_t gen_schedule_seed = 1;
  gen->add_option("--L1", sp.L1, "Peak spacing")->capture_default_str();
  gen->add_option("--N1", sp.N1, "Number of peaks")->capture_default_str();
  gen->add_option("--lambda", sp.lambda, "Peak-height parameter in (0, 1.5]")->capture_default_str();
  gen->add_option("--sync-seed", sp.seed, "Sync string seed")->capture_default_str();
  gen->add_option("-o,--out", gen_out, "Sync string file")->capture_default_str();
  gen->add_option("--schedule", gen_schedule, "Also write a pulse schedule file");
  gen->add_option("--M", gen_M, "Random bits per sync bit")->capture_default_str();
  gen->add_option("--frames", gen_frames, "Frames in the schedule")->capture_default_str();
  gen->add_option("--seed", gen_schedule_seed, "Schedule seed")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate the channel and write a detection CSV");
  std::string sim_sync, sim_preset = "table1_loss20.0", sim_out = "detections.csv", sim_config;
  std::size_t sim_M = 1, sim_frames = 3;
  std::uint64_t sim_seed = 1, sim_begin = 0;
  std::optional<double> sim_loss;
  sim->add_option("--sync", sim_sync, "Sync string file")->required();
  sim->add_option("--preset", sim_preset, "Scenario preset")->capture_default_str();
  sim->add_option("--config", sim_config, "Experiment config (scenario section is used)");
  sim->add_option("--loss", sim_loss, "Override channel loss in dB");
  sim->add_option("--M", sim_M, "Random bits per sync bit")->capture_default_str();
  sim->add_option("--frames", sim_frames, "Frames to transmit")->capture_default_str();
  sim->add_option("--begin-slot", sim_begin, "First pulse slot the receiver records")
      ->capture_default_str();
  sim->add_option("--seed", sim_seed, "Simulation seed")->capture_default_str();
  sim->add_option("-o,--out", sim_out, "Detection CSV; a .json sidecar is written next to it")
      ->capture_default_str();

  // recover
  auto* rec = app.add_subcommand("recover", "Recover period and frame offset from a detection CSV");
  std::string rec_in, rec_sync, rec_out, rec_corr, rec_segments, rec_hist;
  std::size_t rec_M = 1, rec_K = 1;
  double rec_tau_hint = 20000.0, rec_sigma_g = 50.0, rec_threshold = 5.0;
  std::string rec_search = "stage1_optimum";
  bool rec_delays = false;
  rec->add_option("detections", rec_in, "Detection CSV")->required();
  rec->add_option("--sync", rec_sync, "Sync string file")->required();
  rec->add_option("--M", rec_M, "Random bits per sync bit")->capture_default_str();
  rec->add_option("--K", rec_K, "Frames to accumulate")->capture_default_str();
  rec->add_option("--tau-hint", rec_tau_hint, "Nominal sender period in ps")->capture_default_str();
  rec->add_option("--sigma-g", rec_sigma_g, "Gate width in ps")->capture_default_str();
  rec->add_option("--threshold", rec_threshold, "Confidence threshold")->capture_default_str();
  rec->add_option("--search", rec_search, "stage1_optimum or exhaustive")
      ->check(CLI::IsMember({"stage1_optimum", "exhaustive"}))
      ->capture_default_str();
  rec->add_flag("--estimate-delays", rec_delays, "Estimate and remove per-detector path delays");
  rec->add_option("-o,--out", rec_out, "OffsetResult JSON (default stdout)");
  rec->add_option("--dump-correlation", rec_corr, "Correlation arrays CSV");
  rec->add_option("--segments", rec_segments, "Unwrap segment diagnostics CSV");
  rec->add_option("--histogram", rec_hist, "Phase-residual histogram CSV");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run table1, table2, continuous or delays");
  ExperimentArgs ea;
  exp->add_option("which", ea.which, "table1 | table2 | continuous | delays")
      ->required()
      ->check(CLI::IsMember({"table1", "table2", "continuous", "delays"}));
  exp->add_option("--config", ea.config_path, "Versioned JSON config");
  exp->add_option("--preset", ea.preset, "Scenario preset");
  exp->add_option("--trials", ea.trials, "Trials per cell");
  exp->add_option("--K", ea.K, "Frames accumulated (0 = by loss)");
  exp->add_option("--M", ea.M, "Random bits per sync bit");
  exp->add_option("--seed", ea.seed, "Experiment seed");
  exp->add_option("--threads", ea.threads, "Worker threads (0 = all cores)");
  exp->add_option("--search", ea.search, "stage1_optimum or exhaustive");
  exp->add_option("--mode", ea.mode, "distributed or start_only");
  exp->add_option("--duration", ea.duration_s, "Continuous run length in seconds");
  exp->add_option("-o,--out", ea.out_csv, "Summary CSV (default stdout)");
  exp->add_option("--trials-csv", ea.trials_csv, "Per-trial results CSV");
  exp->add_option("--summary", ea.summary_json, "Summary JSON");
  exp->add_flag("--timing", ea.timing, "Add a runtime_ms column to the per-trial CSV");

  // selftest
  auto* self = app.add_subcommand("selftest", "Cross-check fast paths against reference oracles");
  std::uint64_t self_seed = 11;
  std::size_t self_cases = 60;
  self->add_option("--seed", self_seed, "Seed")->capture_default_str();
  self->add_option("--cases", self_cases, "Random offset cases")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const qsync::SyncString s = qsync::generate_sync_string(sp);
      qsync::io::write_sync_string(gen_out, s);
      if (!gen_schedule.empty()) {
        const auto layout = qsync::build_layout(gen_M, s);
        qsync::io::write_schedule(gen_schedule,
                                  qsync::build_schedule(layout, s, gen_frames, gen_schedule_seed));
      }
      return 0;
    }
    if (*sim) {
      const qsync::SyncString s = qsync::io::read_sync_string(sim_sync);
      qsync::Scenario sc = qsync::scenario_presets(sim_preset);
      if (!sim_config.empty()) sc = qsync::load_config(sim_config).scenario;
      if (sim_loss) sc.channel.loss_db = *sim_loss;
      const auto layout = qsync::build_layout(sim_M, s);
      const qsync::FrameSchedule schedule(layout, s, sim_frames, qsync::derive_seed(sim_seed, 1));
      const auto stream = qsync::transmit(schedule, sc.clock, sc.channel, sc.delays,
                                          qsync::derive_seed(sim_seed, 2),
                                          {sim_begin, schedule.total_pulses()});
      qsync::io::write_detections_csv(sim_out, stream);
      json side;
      side["scenario"] = sc.name;
      side["clock"] = {{"tau_A_ps", sc.clock.tau_A_ps}, {"rho", sc.clock.rho},
                       {"t0_ps", sc.clock.t0_ps},      {"sigma_ps", sc.clock.sigma_ps},
                       {"wander_step", sc.clock.wander_step}};
      side["channel"] = {{"loss_db", sc.channel.loss_db}, {"mu", sc.channel.mu},
                         {"dark_rate", sc.channel.dark_rate}, {"det_eff", sc.channel.det_eff},
                         {"z_basis_prob", sc.channel.z_basis_prob}, {"e_mis", sc.channel.e_mis}};
      side["delays_ps"] = sc.delays.ps;
      side["sync"] = {{"L1", s.params.L1}, {"N1", s.params.N1}, {"lambda", s.params.lambda},
                      {"seed", s.params.seed}};
      side["M"] = sim_M;
      side["frames"] = sim_frames;
      side["begin_slot"] = sim_begin;
      side["seed"] = sim_seed;
      side["schedule_seed"] = qsync::derive_seed(sim_seed, 1);
      side["detections"] = stream.size();
      std::filesystem::path sidecar(sim_out);
      sidecar.replace_extension(".json");
      qsync::io::write_text(sidecar, side.dump(2) + "\n");
      std::cerr << "wrote " << stream.size() << " detections to " << sim_out << '\n';
      return 0;
    }
    if (*rec) {
      const qsync::SyncString s = qsync::io::read_sync_string(rec_sync);
      qsync::DetectionStream stream = qsync::io::read_detections_csv(rec_in);
      if (stream.empty())
        throw qsync::Error(qsync::ErrorCode::too_few_detections, "empty detection file");
      std::vector<qsync::SegmentDiagnostic> segments;
      qsync::PeriodEstimate est = qsync::recover_period(stream, rec_tau_hint);
      if (rec_delays) {
        const auto pd = qsync::estimate_path_delays(stream, est);
        stream = qsync::compensate_delays(stream, pd.delays);
        std::cerr << qsync::io::to_json(pd) << '\n';
      }
      est = qsync::refine_period_lts(stream, est.tau_B0_ps, {}, &segments);
      if (!rec_segments.empty()) qsync::io::write_segments_csv(rec_segments, segments);
      if (!rec_hist.empty())
        qsync::io::write_histogram_csv(rec_hist, qsync::phase_histogram(stream, est, 200),
                                       est.tau_B_ps);
      qsync::GateConfig gate;
      gate.sigma_g_ps = rec_sigma_g;
      const auto gated = qsync::gate_filter(stream, est, gate);
      const double t0 = static_cast<double>(gated.front().t_ps);
      const double start =
          est.phase_origin_ps +
          std::round((t0 - est.phase_origin_ps) / est.tau_B_ps) * est.tau_B_ps;
      const auto layout = qsync::build_layout(rec_M, s);
      qsync::FindOffsetOptions opt;
      opt.success_threshold = rec_threshold;
      opt.search = rec_search == "exhaustive" ? qsync::Stage2Search::exhaustive
                                              : qsync::Stage2Search::stage1_optimum;
      const auto hl = qsync::recover_offset_highloss(gated, est, s, layout, rec_K, start, opt);
      if (!rec_corr.empty()) {
        qsync::CorrelationTrace trace;
        qsync::find_offset(qsync::separate_rows(hl.accumulated), s, est.tau_B_ps, opt, &trace);
        qsync::io::write_correlation_csv(rec_corr, trace);
      }
      emit(rec_out, [&](std::ostream& o) { o << qsync::io::to_json(hl.offset) << '\n'; });
      std::cerr << qsync::io::to_json(est) << '\n';
      return hl.offset.success ? 0 : 2;
    }
    if (*exp) return run_experiment(ea);
    if (*self) return qsync::tools::run_selftest(std::cout, self_seed, self_cases) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "qsync: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
