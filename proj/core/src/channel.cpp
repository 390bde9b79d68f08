#include "qsync/channel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qsync/error.hpp"
#include "qsync/rng.hpp"

namespace qsync {

const char* to_string(TruthKind k) noexcept {
  switch (k) {
    case TruthKind::sync: return "sync";
    case TruthKind::random: return "random";
    case TruthKind::dark: return "dark";
  }
  return "?";
}

void ClockModel::validate() const {
  if (!(tau_A_ps > 0.0)) throw Error(ErrorCode::invalid_argument, "tau_A must be positive");
  if (!(sigma_ps >= 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be >= 0");
  if (!(std::abs(rho) < 1e-3)) throw Error(ErrorCode::invalid_argument, "|rho| must be < 1e-3");
  if (!(wander_step >= 0.0)) throw Error(ErrorCode::invalid_argument, "wander_step must be >= 0");
}

double ChannelParams::transmittance() const noexcept {
  return std::pow(10.0, -loss_db / 10.0) * det_eff;
}

double ChannelParams::click_probability() const noexcept {
  return -std::expm1(-mu * transmittance());
}

void ChannelParams::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(loss_db >= 0.0)) throw Error(ErrorCode::invalid_argument, "loss_db must be >= 0");
  if (!(mu > 0.0)) throw Error(ErrorCode::invalid_argument, "mu must be positive");
  if (!prob(dark_rate) || !prob(det_eff) || !prob(z_basis_prob) || !prob(e_mis))
    throw Error(ErrorCode::invalid_argument, "channel probabilities must lie in [0, 1]");
}

namespace {

// Index of the next success after `pos` in a Bernoulli(p) sequence, or
// `limit` if none occurs before it.
class BernoulliSkipper {
 public:
  BernoulliSkipper(double p, Engine& eng) : p_(p), log_q_(std::log1p(-p)), eng_(eng) {}

  std::uint64_t next(std::uint64_t pos, std::uint64_t limit) {
    if (p_ <= 0.0) return limit;
    if (p_ >= 1.0) return pos;
    // Inverse-CDF geometric draw; log1p keeps tiny p well conditioned.
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(eng_);
    const double gap = std::floor(std::log1p(-u) / log_q_);
    if (!(gap < static_cast<double>(limit - pos))) return limit;
    return pos + static_cast<std::uint64_t>(gap);
  }

 private:
  double p_;
  double log_q_;
  Engine& eng_;
};

// Arrival-time model with per-frame frequency wander: frame f runs at
// period tau_A (1 + rho_f), and frame start times accumulate exactly.
class SlotClock {
 public:
  SlotClock(const ClockModel& clock, std::uint64_t frame_length, std::size_t frames,
            std::uint64_t seed)
      : tau_A_(clock.tau_A_ps), nf_(frame_length) {
    Engine eng(derive_seed(seed, 3));
    std::normal_distribution<double> step(0.0, 1.0);
    rho_.resize(frames);
    start_.resize(frames + 1);
    double rho = clock.rho;
    long double t = clock.t0_ps;
    for (std::size_t f = 0; f < frames; ++f) {
      rho_[f] = rho;
      start_[f] = t;
      t += static_cast<long double>(nf_) * tau_A_ * (1.0L + rho);
      if (clock.wander_step > 0.0) rho += clock.wander_step * step(eng);
    }
    start_[frames] = t;
  }

  long double time_of(std::uint64_t slot) const {
    const std::uint64_t f = slot / nf_;
    const std::uint64_t k = slot % nf_;
    return start_[f] + static_cast<long double>(k) * tau_A_ * (1.0L + rho_[f]);
  }
  double period_at(std::uint64_t slot) const { return tau_A_ * (1.0 + rho_[slot / nf_]); }

 private:
  double tau_A_;
  std::uint64_t nf_;
  std::vector<double> rho_;
  std::vector<long double> start_;
};

Detector measure(const PulseRecord& pulse, const ChannelParams& ch, Engine& eng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Basis bob = u01(eng) < ch.z_basis_prob ? Basis::Z : Basis::X;
  int bit;
  if (bob == pulse.basis) {
    bit = u01(eng) < ch.e_mis ? 1 - pulse.bit : pulse.bit;
  } else {
    bit = u01(eng) < 0.5 ? 1 : 0;
  }
  return encode(bob, bit);
}

}  // namespace

DetectionStream transmit(const FrameSchedule& schedule, const ClockModel& clock,
                         const ChannelParams& ch, const PathDelays& delays, std::uint64_t seed,
                         SlotRange range) {
  clock.validate();
  ch.validate();
  const std::uint64_t first = range.begin;
  const std::uint64_t last = std::min(range.end, schedule.total_pulses());
  DetectionStream out;
  if (first >= last) return out;

  const SlotClock slot_clock(clock, schedule.layout().frame_length(), schedule.frames(), seed);

  // Signal photons.
  Engine sig(derive_seed(seed, 1));
  std::normal_distribution<double> jitter(0.0, 1.0);
  BernoulliSkipper clicks(ch.click_probability(), sig);
  out.reserve(static_cast<std::size_t>(
      std::min<double>(1.2 * ch.click_probability() * double(last - first) + 64.0, 1e8)));
  for (std::uint64_t n = clicks.next(first, last); n < last; n = clicks.next(n + 1, last)) {
    const PulseRecord pulse = schedule.pulse(n);
    const Detector det = measure(pulse, ch, sig);
    const long double t = slot_clock.time_of(n) + clock.sigma_ps * jitter(sig) + delays[det];
    if (t < 0) continue;
    out.push_back(DetectionRecord{static_cast<std::int64_t>(std::llround(t)), det,
                                  static_cast<std::int64_t>(n),
                                  pulse.kind == SlotKind::sync ? TruthKind::sync
                                                               : TruthKind::random});
  }

  // Dark counts: one Bernoulli trial per (slot, detector), uniform in the slot.
  Engine dark(derive_seed(seed, 2));
  std::uniform_real_distribution<double> in_slot(-0.5, 0.5);
  BernoulliSkipper darks(ch.dark_rate, dark);
  const std::uint64_t trials_end = first + 4 * (last - first);
  for (std::uint64_t k = darks.next(first, trials_end); k < trials_end;
       k = darks.next(k + 1, trials_end)) {
    const std::uint64_t n = first + (k - first) / 4;
    const auto det = static_cast<Detector>((k - first) % 4);
    const long double t = slot_clock.time_of(n) + slot_clock.period_at(n) * in_slot(dark);
    if (t < 0) continue;
    out.push_back(DetectionRecord{static_cast<std::int64_t>(std::llround(t)), det,
                                  static_cast<std::int64_t>(n), TruthKind::dark});
  }

  std::stable_sort(out.begin(), out.end(), [](const DetectionRecord& a, const DetectionRecord& b) {
    return a.t_ps < b.t_ps;
  });
  return out;
}

namespace {

Scenario lab_system(std::string name, double loss_db) {
  Scenario s;
  s.name = std::move(name);
  s.clock.tau_A_ps = 20000.0;
  s.clock.rho = 9.25e-7;
  s.clock.t0_ps = 1.0e6;
  s.clock.sigma_ps = 50.0;
  s.channel.loss_db = loss_db;
  s.channel.mu = 1.0;
  s.channel.dark_rate = 2e-6;
  s.channel.det_eff = 0.513;
  s.channel.z_basis_prob = 0.9;
  s.channel.e_mis = 0.005;
  s.delays[Detector::H] = 0.0;
  s.delays[Detector::V] = 650.0;
  s.delays[Detector::D] = 1480.0;
  s.delays[Detector::A] = 1010.0;
  return s;
}

std::string loss_label(double loss) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "table1_loss%.1f", loss);
  return buf;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names{"ideal", "fig4_delays", "continuous"};
  for (double loss : table1_losses) names.push_back(loss_label(loss));
  return names;
}

Scenario scenario_presets(const std::string& name) {
  if (name == "ideal") {
    Scenario s;
    s.name = name;
    s.clock.sigma_ps = 0.0;
    s.clock.rho = 0.0;
    s.channel.loss_db = 0.0;
    s.channel.dark_rate = 0.0;
    s.channel.e_mis = 0.0;
    s.channel.det_eff = 1.0;
    return s;
  }
  if (name == "fig4_delays") return lab_system(name, 20.0);
  if (name == "continuous") {
    Scenario s = lab_system(name, 20.0);
    s.clock.wander_step = 3e-10;
    return s;
  }
  for (double loss : table1_losses)
    if (name == loss_label(loss)) return lab_system(name, loss);
  throw Error(ErrorCode::invalid_argument, "unknown preset '" + name + "'");
}

}  // namespace qsync
