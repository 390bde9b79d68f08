#include "qsync/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "qsync/error.hpp"
#include "qsync/io.hpp"
#include "qsync/rng.hpp"

namespace qsync {
namespace {

using nlohmann::json;

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// Seed stream tags, kept distinct so no two roles share a sub-seed.
constexpr std::uint64_t tag_trial = 0x7421;
constexpr std::uint64_t tag_calibration = 0xCA1B;
constexpr std::uint64_t tag_delay_trial = 0xDE1A;
constexpr std::uint64_t tag_continuous = 0xC047;

std::uint64_t loss_code(double loss_db) {
  return static_cast<std::uint64_t>(std::llround(loss_db * 1000.0));
}

std::int64_t floor_mod(std::int64_t a, std::int64_t m) {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return nan;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

std::string fmt(const char* spec, double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Run body(i) for i in [0, n) on `threads` workers. Each index is written
// by exactly one worker, so results do not depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

// Receiver-side result of one synchronization pass over a stream.
struct Alignment {
  PeriodEstimate est;
  DetectionStream gated;
  double start_ps = 0.0;
  HighLossResult hl;
};

Alignment align(const DetectionStream& stream, const ExperimentConfig& cfg, double tau_A_hint,
                const SyncString& sync, const FrameLayout& layout, std::size_t K) {
  Alignment a;
  a.est = recover_period(stream, tau_A_hint, cfg.coarse, cfg.refine);
  a.gated = gate_filter(stream, a.est, cfg.gate());
  // Snap the first gated detection onto the recovered slot grid.
  const double t0 = static_cast<double>(a.gated.front().t_ps);
  const double m = std::round((t0 - a.est.phase_origin_ps) / a.est.tau_B_ps);
  a.start_ps = a.est.phase_origin_ps + m * a.est.tau_B_ps;
  a.hl = recover_offset_highloss(a.gated, a.est, sync, layout, K, a.start_ps,
                                 {cfg.search, cfg.success_threshold});
  return a;
}

std::int64_t slot_of(double t_ps, double start_ps, double tau_ps) {
  return static_cast<std::int64_t>(std::llround((t_ps - start_ps) / tau_ps));
}

// Mode over signal detections of (true slot - Bob's slot index). This is
// the slot of Alice's pulse that Bob's window position 0 corresponds to.
std::optional<std::int64_t> true_start_slot(const DetectionStream& gated, double start_ps,
                                            double tau_ps, std::int64_t n_slots) {
  std::map<std::int64_t, std::size_t> votes;
  for (const auto& r : gated) {
    if (!r.truth_slot || r.truth_kind == TruthKind::dark) continue;
    const std::int64_t p = slot_of(static_cast<double>(r.t_ps), start_ps, tau_ps);
    if (p < 0 || p >= n_slots) continue;
    votes[*r.truth_slot - p]++;
  }
  if (votes.empty()) return std::nullopt;
  return std::max_element(votes.begin(), votes.end(),
                          [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

// Bob's estimate of Alice's slot at his window position 0. The offset only
// determines it modulo the frame length; the frame count is taken nearest
// to the truth, standing in for a classical frame counter.
std::int64_t estimated_start_slot(std::size_t slot_offset, std::int64_t n_start_true,
                                  std::int64_t nf) {
  const std::int64_t delta_true = floor_mod(-n_start_true, nf);
  std::int64_t d = floor_mod(delta_true - static_cast<std::int64_t>(slot_offset), nf);
  if (d > nf / 2) d -= nf;
  return n_start_true + d;
}

std::optional<QberResult> qber_over(const DetectionStream& stream, double start_ps, double tau_ps,
                                    std::int64_t n_start_hat, std::int64_t p_begin,
                                    std::int64_t p_end, const FrameSchedule& schedule) {
  std::vector<AlignedDetection> aligned;
  aligned.reserve(stream.size());
  for (const auto& r : stream) {
    const std::int64_t p = slot_of(static_cast<double>(r.t_ps), start_ps, tau_ps);
    if (p < p_begin || p >= p_end) continue;
    aligned.push_back({n_start_hat + p, r.detector});
  }
  try {
    return compute_qber(aligned, schedule);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::no_sifted_bits) return std::nullopt;
    throw;
  }
}

// Median of t - (start + (n_true - n_start_hat) tau) over signal detections.
double median_time_error(const DetectionStream& stream, double start_ps, double tau_ps,
                         std::int64_t n_start_hat, double t_begin, double t_end) {
  std::vector<double> e;
  for (const auto& r : stream) {
    const auto t = static_cast<double>(r.t_ps);
    if (t < t_begin || t >= t_end) continue;
    if (!r.truth_slot || r.truth_kind == TruthKind::dark) continue;
    const double predicted =
        start_ps + static_cast<double>(*r.truth_slot - n_start_hat) * tau_ps;
    e.push_back(t - predicted);
  }
  return median_of(std::move(e));
}

double wrap_half(double v, double tau) {
  double r = std::fmod(v, tau);
  if (r > tau / 2) r -= tau;
  if (r <= -tau / 2) r += tau;
  return r;
}

DetectionStream time_slice(const DetectionStream& s, double t_begin, double t_end) {
  auto lo = std::lower_bound(s.begin(), s.end(), t_begin,
                             [](const DetectionRecord& r, double t) { return double(r.t_ps) < t; });
  auto hi = std::lower_bound(lo, s.end(), t_end,
                             [](const DetectionRecord& r, double t) { return double(r.t_ps) < t; });
  return DetectionStream(lo, hi);
}

const char* mode_name(SyncMode m) {
  return m == SyncMode::distributed ? "distributed" : "start_only";
}
const char* search_name(Stage2Search s) {
  return s == Stage2Search::exhaustive ? "exhaustive" : "stage1_optimum";
}
const char* compensation_name(DelayCompensation d) {
  switch (d) {
    case DelayCompensation::calibrated: return "calibrated";
    case DelayCompensation::planted: return "planted";
    case DelayCompensation::none: return "none";
  }
  return "?";
}

template <class E>
E enum_from(const json& j, const char* key, std::initializer_list<std::pair<const char*, E>> map) {
  const auto s = j.get<std::string>();
  for (const auto& [name, v] : map)
    if (s == name) return v;
  throw Error(ErrorCode::parse_error, std::string("config: bad value '") + s + "' for " + key);
}

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(ErrorCode::parse_error, std::string("config: ") + where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) ==
        allowed.end())
      throw Error(ErrorCode::parse_error, std::string("config: unknown key '") + k + "' in " + where);
  }
}

template <class T>
void assign(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (trials < 1) throw Error(ErrorCode::invalid_argument, "trials must be >= 1");
  if (M < 1) throw Error(ErrorCode::invalid_argument, "M must be >= 1");
  sync.validate();
  scenario.clock.validate();
  scenario.channel.validate();
  if (!(success_threshold >= 0.0))
    throw Error(ErrorCode::invalid_argument, "success_threshold must be >= 0");
  if (!(gate_acceptance > 0.0)) throw Error(ErrorCode::invalid_argument, "gate acceptance must be > 0");
  if (table2_K.empty() || std::find(table2_K.begin(), table2_K.end(), 0u) != table2_K.end())
    throw Error(ErrorCode::invalid_argument, "table2 K values must be >= 1");
  if (continuous.window_frames < 1 || !(continuous.duration_s > 0.0))
    throw Error(ErrorCode::invalid_argument, "continuous run needs positive duration and window");
}

std::size_t ExperimentConfig::K_for_loss(double loss_db) const noexcept {
  if (K > 0) return K;
  return loss_db <= 22.7 + 1e-9 ? 1 : 8;
}

GateConfig ExperimentConfig::gate() const noexcept {
  GateConfig g;
  g.sigma_g_ps = sigma_g_ps > 0.0 ? sigma_g_ps : std::max(scenario.clock.sigma_ps, 1.0);
  g.acceptance = gate_acceptance;
  return g;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = ExperimentConfig::current_version;
  j["preset"] = c.preset;
  const ClockModel& ck = c.scenario.clock;
  j["clock"] = {{"tau_A_ps", ck.tau_A_ps}, {"rho", ck.rho}, {"t0_ps", ck.t0_ps},
                {"sigma_ps", ck.sigma_ps}, {"wander_step", ck.wander_step}};
  const ChannelParams& ch = c.scenario.channel;
  j["channel"] = {{"loss_db", ch.loss_db},     {"mu", ch.mu},
                  {"dark_rate", ch.dark_rate}, {"det_eff", ch.det_eff},
                  {"z_basis_prob", ch.z_basis_prob}, {"e_mis", ch.e_mis}};
  j["delays_ps"] = c.scenario.delays.ps;
  j["sync"] = {{"L1", c.sync.L1}, {"N1", c.sync.N1}, {"lambda", c.sync.lambda},
               {"seed", c.sync.seed}};
  j["M"] = c.M;
  j["K"] = c.K;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["mode"] = mode_name(c.mode);
  j["search"] = search_name(c.search);
  j["success_threshold"] = c.success_threshold;
  j["gate"] = {{"sigma_g_ps", c.sigma_g_ps}, {"acceptance", c.gate_acceptance}};
  j["delay_compensation"] = compensation_name(c.delay_compensation);
  j["calibration_frames"] = c.calibration_frames;
  j["table1_losses"] = c.table1_losses;
  j["table2_losses"] = c.table2_losses;
  j["table2_K"] = c.table2_K;
  j["continuous"] = {{"duration_s", c.continuous.duration_s},
                     {"window_frames", c.continuous.window_frames},
                     {"loss_db", c.continuous.loss_db}};
  j["threads"] = c.threads;
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  try {
    const json j = json::parse(text);
    check_keys(j, "config",
               {"version", "preset", "clock", "channel", "delays_ps", "sync", "M", "K", "trials",
                "seed", "mode", "search", "success_threshold", "gate", "delay_compensation",
                "calibration_frames", "table1_losses", "table2_losses", "table2_K", "continuous",
                "threads"});
    const int version = j.value("version", ExperimentConfig::current_version);
    if (version != ExperimentConfig::current_version)
      throw Error(ErrorCode::parse_error,
                  "config: unsupported version " + std::to_string(version));
    if (j.contains("preset")) {
      c.preset = j.at("preset").get<std::string>();
      c.scenario = scenario_presets(c.preset);
    }
    if (j.contains("clock")) {
      const json& k = j.at("clock");
      check_keys(k, "clock", {"tau_A_ps", "rho", "t0_ps", "sigma_ps", "wander_step"});
      assign(k, "tau_A_ps", c.scenario.clock.tau_A_ps);
      assign(k, "rho", c.scenario.clock.rho);
      assign(k, "t0_ps", c.scenario.clock.t0_ps);
      assign(k, "sigma_ps", c.scenario.clock.sigma_ps);
      assign(k, "wander_step", c.scenario.clock.wander_step);
    }
    if (j.contains("channel")) {
      const json& k = j.at("channel");
      check_keys(k, "channel", {"loss_db", "mu", "dark_rate", "det_eff", "z_basis_prob", "e_mis"});
      assign(k, "loss_db", c.scenario.channel.loss_db);
      assign(k, "mu", c.scenario.channel.mu);
      assign(k, "dark_rate", c.scenario.channel.dark_rate);
      assign(k, "det_eff", c.scenario.channel.det_eff);
      assign(k, "z_basis_prob", c.scenario.channel.z_basis_prob);
      assign(k, "e_mis", c.scenario.channel.e_mis);
    }
    assign(j, "delays_ps", c.scenario.delays.ps);
    if (j.contains("sync")) {
      const json& k = j.at("sync");
      check_keys(k, "sync", {"L1", "N1", "lambda", "seed"});
      assign(k, "L1", c.sync.L1);
      assign(k, "N1", c.sync.N1);
      assign(k, "lambda", c.sync.lambda);
      assign(k, "seed", c.sync.seed);
    }
    assign(j, "M", c.M);
    assign(j, "K", c.K);
    assign(j, "trials", c.trials);
    assign(j, "seed", c.seed);
    if (j.contains("mode"))
      c.mode = enum_from<SyncMode>(j.at("mode"), "mode",
                                   {{"distributed", SyncMode::distributed},
                                    {"start_only", SyncMode::start_only}});
    if (j.contains("search"))
      c.search = enum_from<Stage2Search>(j.at("search"), "search",
                                         {{"stage1_optimum", Stage2Search::stage1_optimum},
                                          {"exhaustive", Stage2Search::exhaustive}});
    assign(j, "success_threshold", c.success_threshold);
    if (j.contains("gate")) {
      const json& k = j.at("gate");
      check_keys(k, "gate", {"sigma_g_ps", "acceptance"});
      assign(k, "sigma_g_ps", c.sigma_g_ps);
      assign(k, "acceptance", c.gate_acceptance);
    }
    if (j.contains("delay_compensation"))
      c.delay_compensation = enum_from<DelayCompensation>(
          j.at("delay_compensation"), "delay_compensation",
          {{"calibrated", DelayCompensation::calibrated},
           {"planted", DelayCompensation::planted},
           {"none", DelayCompensation::none}});
    assign(j, "calibration_frames", c.calibration_frames);
    assign(j, "table1_losses", c.table1_losses);
    assign(j, "table2_losses", c.table2_losses);
    assign(j, "table2_K", c.table2_K);
    if (j.contains("continuous")) {
      const json& k = j.at("continuous");
      check_keys(k, "continuous", {"duration_s", "window_frames", "loss_db"});
      assign(k, "duration_s", c.continuous.duration_s);
      assign(k, "window_frames", c.continuous.window_frames);
      assign(k, "loss_db", c.continuous.loss_db);
    }
    assign(j, "threads", c.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(io::read_text(path));
}

QberResult compute_qber(std::span<const AlignedDetection> aligned, const FrameSchedule& schedule) {
  QberResult q;
  const auto total = static_cast<std::int64_t>(schedule.total_pulses());
  for (const AlignedDetection& a : aligned) {
    if (a.slot < 0 || a.slot >= total) continue;
    if (basis_of(a.detector) != Basis::Z) continue;
    const PulseRecord p = schedule.pulse(static_cast<std::uint64_t>(a.slot));
    if (p.kind != SlotKind::random || p.basis != Basis::Z) continue;
    ++q.sifted;
    if (bit_of(a.detector) != p.bit) ++q.errors;
  }
  if (q.sifted == 0) throw Error(ErrorCode::no_sifted_bits, "no Z-sifted random-slot detections");
  return q;
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) return {nan, 0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
  return {p, std::max(0.0, center - half), std::min(1.0, center + half)};
}

SyncString experiment_sync_string(const ExperimentConfig& cfg) {
  return generate_sync_string(cfg.sync);
}

TrialRecord run_trial(const ExperimentConfig& cfg, const SyncString& sync,
                      const PathDelays& compensation, double loss_db, std::size_t K,
                      std::size_t trial) {
  TrialRecord rec;
  rec.loss_db = loss_db;
  rec.K = K;
  rec.trial = trial;
  // Independent of K, so the cells of one loss share channel realizations.
  rec.seed = derive_seed(cfg.seed, tag_trial, loss_code(loss_db) * 1'000'003ULL + trial);
  rec.qber = nan;
  const auto t_begin = std::chrono::steady_clock::now();
  try {
    Scenario sc = cfg.scenario;
    sc.channel.loss_db = loss_db;
    const FrameLayout layout = build_layout(cfg.M, sync);
    const auto nf = static_cast<std::int64_t>(layout.frame_length());

    const CounterRng rng(rec.seed);
    ClockModel clock = sc.clock;
    clock.t0_ps += rng.uniform(0, 0) * clock.tau_A_ps;
    const std::uint64_t n_begin = rng.bits(0, 1) % static_cast<std::uint64_t>(nf);
    rec.tau_B_true_ps = clock.tau_B_ps();

    const FrameSchedule schedule(layout, sync, K + 2, derive_seed(rec.seed, 1),
                                 cfg.mode == SyncMode::start_only
                                     ? SyncPlacement::first_frame_only
                                     : SyncPlacement::every_frame);
    const DetectionStream raw = transmit(schedule, clock, sc.channel, sc.delays,
                                         derive_seed(rec.seed, 2), {n_begin, schedule.total_pulses()});
    rec.detections = raw.size();
    const DetectionStream stream = compensate_delays(raw, compensation);

    const Alignment a = align(stream, cfg, sc.clock.tau_A_ps, sync, layout, K);
    rec.tau_B_hat_ps = a.est.tau_B_ps;
    const OffsetResult& off = a.hl.offset;
    rec.confidence = off.confidence;
    rec.slot_offset = off.slot_offset;
    rec.success_threshold = off.success;
    rec.fill_fraction = a.hl.accumulated.fill_fraction;

    const std::int64_t n_slots = nf * static_cast<std::int64_t>(K);
    const auto n_start = true_start_slot(a.gated, a.start_ps, a.est.tau_B_ps, n_slots);
    if (!n_start) throw Error(ErrorCode::too_few_detections, "no signal detections in window");
    rec.true_offset = static_cast<std::size_t>(floor_mod(-*n_start, nf));
    rec.success_truth = rec.slot_offset == rec.true_offset;

    const std::int64_t n_hat = estimated_start_slot(off.slot_offset, *n_start, nf);
    if (auto q = qber_over(a.gated, a.start_ps, a.est.tau_B_ps, n_hat, 0, n_slots, schedule)) {
      rec.sifted = q->sifted;
      rec.errors = q->errors;
      rec.qber = q->qber();
    }
  } catch (const Error& e) {
    rec.error = e.what();
    rec.success_truth = rec.success_threshold = false;
  }
  rec.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_begin).count();
  return rec;
}

namespace {

struct Cell {
  double loss;
  std::size_t K;
};

CellSummary summarize(const Cell& cell, std::span<const TrialRecord> trials) {
  CellSummary s;
  s.loss_db = cell.loss;
  s.K = cell.K;
  s.trials = trials.size();
  std::size_t sifted = 0, errors = 0, n_qber = 0, n_tau = 0;
  double qber_sum = 0.0, tau_sum = 0.0;
  for (const TrialRecord& t : trials) {
    s.successes_truth += t.success_truth;
    s.successes_threshold += t.success_threshold;
    if (!t.error.empty()) ++s.errors;
    if (t.tau_B_hat_ps > 0.0) {
      tau_sum += t.tau_B_hat_ps;
      ++n_tau;
      s.tau_B_rel_error_max =
          std::max(s.tau_B_rel_error_max, std::abs(t.tau_B_hat_ps / t.tau_B_true_ps - 1.0));
    }
    if (t.tau_B_true_ps > 0.0) s.tau_B_true_ps = t.tau_B_true_ps;
    if (t.success_truth && t.sifted > 0) {
      sifted += t.sifted;
      errors += t.errors;
      qber_sum += t.qber;
      ++n_qber;
    }
  }
  s.p_s_truth = wilson_interval(s.successes_truth, s.trials);
  s.p_s_threshold = wilson_interval(s.successes_threshold, s.trials);
  s.qber = sifted ? static_cast<double>(errors) / static_cast<double>(sifted) : nan;
  s.qber_mean = n_qber ? qber_sum / static_cast<double>(n_qber) : nan;
  s.tau_B_hat_mean_ps = n_tau ? tau_sum / static_cast<double>(n_tau) : nan;
  return s;
}

ExperimentResult run_cells(const ExperimentConfig& cfg, std::string name,
                           const std::vector<Cell>& cells) {
  cfg.validate();
  ExperimentResult r;
  r.name = std::move(name);
  const SyncString sync = experiment_sync_string(cfg);
  r.applied_delays = resolve_delays(cfg);
  r.trials.resize(cells.size() * cfg.trials);
  parallel_for(r.trials.size(), cfg.threads, [&](std::size_t idx) {
    const Cell& c = cells[idx / cfg.trials];
    r.trials[idx] = run_trial(cfg, sync, r.applied_delays, c.loss, c.K, idx % cfg.trials);
  });
  for (std::size_t c = 0; c < cells.size(); ++c)
    r.cells.push_back(summarize(
        cells[c], std::span<const TrialRecord>(r.trials).subspan(c * cfg.trials, cfg.trials)));
  return r;
}

}  // namespace

ExperimentResult run_table1(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (double loss : cfg.table1_losses) cells.push_back({loss, cfg.K_for_loss(loss)});
  return run_cells(cfg, "table1", cells);
}

ExperimentResult run_table2(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (double loss : cfg.table2_losses)
    for (std::size_t K : cfg.table2_K) cells.push_back({loss, K});
  return run_cells(cfg, "table2", cells);
}

ContinuousResult run_continuous_comparison(const ExperimentConfig& cfg) {
  cfg.validate();
  ContinuousResult out;
  Scenario sc = cfg.scenario;
  sc.channel.loss_db = cfg.continuous.loss_db;
  const SyncString sync = experiment_sync_string(cfg);
  const FrameLayout layout = build_layout(cfg.M, sync);
  const std::size_t nf = layout.frame_length();
  const double frame_ps = static_cast<double>(nf) * sc.clock.tau_A_ps;
  const std::size_t W = cfg.continuous.window_frames;
  const auto frames = static_cast<std::size_t>(std::ceil(cfg.continuous.duration_s * 1e12 / frame_ps));
  const std::size_t n_windows = std::max<std::size_t>(1, frames / W);
  const std::size_t K = cfg.K_for_loss(sc.channel.loss_db);
  const PathDelays comp = resolve_delays(cfg);
  const std::uint64_t seed = derive_seed(cfg.seed, tag_continuous);
  out.tau_B_ps = sc.clock.tau_B_ps();

  for (const SyncMode mode : {SyncMode::distributed, SyncMode::start_only}) {
    const FrameSchedule schedule(layout, sync, n_windows * W, derive_seed(seed, 1),
                                 mode == SyncMode::start_only ? SyncPlacement::first_frame_only
                                                              : SyncPlacement::every_frame);
    const DetectionStream stream =
        compensate_delays(transmit(schedule, sc.clock, sc.channel, sc.delays, derive_seed(seed, 2)),
                          comp);
    auto& series = mode == SyncMode::distributed ? out.distributed : out.start_only;
    if (stream.empty()) break;
    const double t_first = static_cast<double>(stream.front().t_ps);
    const double window_ps = static_cast<double>(W) * frame_ps;

    // Model fixed once from window 0 in start_only mode.
    std::optional<Alignment> fixed;
    std::int64_t fixed_n_hat = 0;

    for (std::size_t w = 0; w < n_windows; ++w) {
      WindowRecord rec;
      rec.window = w;
      rec.t_s = static_cast<double>(w) * window_ps * 1e-12;
      rec.qber = nan;
      rec.time_error_ps = rec.time_error_wrapped_ps = nan;
      const double t_begin = t_first + static_cast<double>(w) * window_ps;
      const double t_end = t_begin + window_ps;
      try {
        const DetectionStream slice = time_slice(stream, t_begin, t_end);
        const Alignment* model = nullptr;
        std::int64_t n_hat = 0;
        std::optional<Alignment> local;
        if (mode == SyncMode::distributed || !fixed) {
          local = align(slice, cfg, sc.clock.tau_A_ps, sync, layout, K);
          const auto n_slots = static_cast<std::int64_t>(nf * K);
          const auto n_start =
              true_start_slot(local->gated, local->start_ps, local->est.tau_B_ps, n_slots);
          if (!n_start) throw Error(ErrorCode::too_few_detections, "no signal detections");
          n_hat = estimated_start_slot(local->hl.offset.slot_offset, *n_start,
                                       static_cast<std::int64_t>(nf));
          rec.offset_success =
              local->hl.offset.slot_offset ==
              static_cast<std::size_t>(floor_mod(-*n_start, static_cast<std::int64_t>(nf)));
          if (mode == SyncMode::start_only) {
            fixed = std::move(local);
            fixed_n_hat = n_hat;
            model = &*fixed;
          } else {
            model = &*local;
          }
        } else {
          model = &*fixed;
          n_hat = fixed_n_hat;
        }
        const double tau = model->est.tau_B_ps;
        const double err = median_time_error(slice, model->start_ps, tau, n_hat, t_begin, t_end);
        rec.time_error_ps = err;
        rec.time_error_wrapped_ps = wrap_half(err, tau);
        // Distributed windows are scored on their own gated detections; the
        // fixed model has no per-window gate and classifies every click.
        const DetectionStream& scored = mode == SyncMode::distributed ? model->gated : slice;
        const std::int64_t p_lo = slot_of(t_begin, model->start_ps, tau);
        const std::int64_t p_hi = slot_of(t_end, model->start_ps, tau);
        if (auto q = qber_over(scored, model->start_ps, tau, n_hat, p_lo, p_hi, schedule)) {
          rec.qber = q->qber();
          rec.sifted = q->sifted;
        }
      } catch (const Error& e) {
        rec.error = e.what();
        rec.offset_success = false;
      }
      series.push_back(std::move(rec));
    }
  }
  for (const WindowRecord& r : out.start_only)
    if (!std::isnan(r.time_error_ps) && std::abs(r.time_error_ps) > out.tau_B_ps / 2) {
      out.horizon_window = r.window;
      break;
    }
  return out;
}

namespace {

DelayTrial delay_trial(const ExperimentConfig& cfg, const SyncString& sync, std::uint64_t seed,
                       std::size_t index) {
  DelayTrial d;
  d.trial = index;
  d.planted = cfg.scenario.delays;
  d.max_abs_error_ps = nan;
  try {
    ClockModel clock = cfg.scenario.clock;
    clock.t0_ps += CounterRng(seed).uniform(0, 0) * clock.tau_A_ps;
    const FrameSchedule schedule(build_layout(cfg.M, sync), sync, cfg.calibration_frames,
                                 derive_seed(seed, 1));
    const DetectionStream stream =
        transmit(schedule, clock, cfg.scenario.channel, cfg.scenario.delays, derive_seed(seed, 2));
    const PeriodEstimate est =
        recover_period(stream, cfg.scenario.clock.tau_A_ps, cfg.coarse, cfg.refine);
    const PathDelayEstimate pd = estimate_path_delays(stream, est);
    d.estimated = pd.delays;
    double worst = 0.0;
    for (Detector det : all_detectors)
      worst = std::max(worst, std::abs(pd.delays[det] - d.planted[det]));
    d.max_abs_error_ps = worst;
  } catch (const Error& e) {
    d.error = e.what();
  }
  return d;
}

}  // namespace

PathDelays resolve_delays(const ExperimentConfig& cfg) {
  switch (cfg.delay_compensation) {
    case DelayCompensation::none: return {};
    case DelayCompensation::planted: return cfg.scenario.delays;
    case DelayCompensation::calibrated: break;
  }
  const DelayTrial d =
      delay_trial(cfg, experiment_sync_string(cfg), derive_seed(cfg.seed, tag_calibration), 0);
  if (!d.error.empty()) throw Error(ErrorCode::missing_detector, "delay calibration failed: " + d.error);
  return d.estimated;
}

std::vector<DelayTrial> run_delay_estimation(const ExperimentConfig& cfg) {
  cfg.validate();
  const SyncString sync = experiment_sync_string(cfg);
  std::vector<DelayTrial> out(cfg.trials);
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
    out[i] = delay_trial(cfg, sync, derive_seed(cfg.seed, tag_delay_trial, i), i);
  });
  return out;
}

void write_trials_csv(std::ostream& out, const ExperimentResult& r, bool timing) {
  out << "loss_db,K,trial,seed,p_s_truth,p_s_threshold,confidence,slot_offset,true_offset,"
         "qber,sifted,errors,tau_B_hat_ps,tau_B_true_ps,fill_fraction,detections,error";
  if (timing) out << ",runtime_ms";
  out << '\n';
  for (const TrialRecord& t : r.trials) {
    out << fmt("%.1f", t.loss_db) << ',' << t.K << ',' << t.trial << ',' << t.seed << ','
        << int(t.success_truth) << ',' << int(t.success_threshold) << ','
        << fmt("%.6f", t.confidence) << ',' << t.slot_offset << ',' << t.true_offset << ','
        << fmt("%.8f", t.qber) << ',' << t.sifted << ',' << t.errors << ','
        << fmt("%.9f", t.tau_B_hat_ps) << ',' << fmt("%.9f", t.tau_B_true_ps) << ','
        << fmt("%.8f", t.fill_fraction) << ',' << t.detections << ',' << '"' << t.error << '"';
    if (timing) out << ',' << fmt("%.3f", t.runtime_ms);
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const ExperimentResult& r) {
  out << "loss_db,K,trials,p_s_truth,p_s_truth_lo,p_s_truth_hi,p_s_threshold,p_s_threshold_lo,"
         "p_s_threshold_hi,qber,qber_mean,tau_B_hat_mean_ps,tau_B_true_ps,tau_B_rel_error_max,"
         "pipeline_errors\n";
  for (const CellSummary& c : r.cells)
    out << fmt("%.1f", c.loss_db) << ',' << c.K << ',' << c.trials << ','
        << fmt("%.4f", c.p_s_truth.center) << ',' << fmt("%.4f", c.p_s_truth.lower) << ','
        << fmt("%.4f", c.p_s_truth.upper) << ',' << fmt("%.4f", c.p_s_threshold.center) << ','
        << fmt("%.4f", c.p_s_threshold.lower) << ',' << fmt("%.4f", c.p_s_threshold.upper) << ','
        << fmt("%.6f", c.qber) << ',' << fmt("%.6f", c.qber_mean) << ','
        << fmt("%.9f", c.tau_B_hat_mean_ps) << ',' << fmt("%.9f", c.tau_B_true_ps) << ','
        << fmt("%.3e", c.tau_B_rel_error_max) << ',' << c.errors << '\n';
}

std::string summary_json(const ExperimentResult& r, const ExperimentConfig& cfg) {
  auto num = [](double v) -> json { return std::isnan(v) ? json(nullptr) : json(v); };
  json j;
  j["experiment"] = r.name;
  j["config"] = json::parse(config_to_json(cfg));
  j["applied_delays_ps"] = r.applied_delays.ps;
  json cells = json::array();
  for (const CellSummary& c : r.cells) {
    cells.push_back({{"loss_db", c.loss_db},
                     {"K", c.K},
                     {"trials", c.trials},
                     {"p_s_truth", num(c.p_s_truth.center)},
                     {"p_s_truth_wilson", {c.p_s_truth.lower, c.p_s_truth.upper}},
                     {"p_s_threshold", num(c.p_s_threshold.center)},
                     {"p_s_threshold_wilson", {c.p_s_threshold.lower, c.p_s_threshold.upper}},
                     {"qber", num(c.qber)},
                     {"qber_mean", num(c.qber_mean)},
                     {"tau_B_hat_mean_ps", num(c.tau_B_hat_mean_ps)},
                     {"tau_B_true_ps", c.tau_B_true_ps},
                     {"tau_B_rel_error_max", c.tau_B_rel_error_max},
                     {"pipeline_errors", c.errors}});
  }
  j["cells"] = cells;
  return j.dump(2);
}

void write_continuous_csv(std::ostream& out, const ContinuousResult& r) {
  out << "mode,window,t_s,time_error_ps,time_error_wrapped_ps,qber,sifted,offset_success,error\n";
  for (const auto* series : {&r.distributed, &r.start_only}) {
    const char* name = series == &r.distributed ? "distributed" : "start_only";
    for (const WindowRecord& w : *series)
      out << name << ',' << w.window << ',' << fmt("%.6f", w.t_s) << ','
          << fmt("%.3f", w.time_error_ps) << ',' << fmt("%.3f", w.time_error_wrapped_ps) << ','
          << fmt("%.8f", w.qber) << ',' << w.sifted << ',' << int(w.offset_success) << ",\""
          << w.error << "\"\n";
  }
}

void write_delays_csv(std::ostream& out, const std::vector<DelayTrial>& trials) {
  out << "trial,detector,planted_ps,estimated_ps,error_ps,status\n";
  for (const DelayTrial& t : trials)
    for (Detector d : all_detectors)
      out << t.trial << ',' << to_char(d) << ',' << fmt("%.3f", t.planted[d]) << ','
          << fmt("%.3f", t.estimated[d]) << ',' << fmt("%.3f", t.estimated[d] - t.planted[d])
          << ",\"" << t.error << "\"\n";
}

}  // namespace qsync
