#include "qsync/clock_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qsync/error.hpp"
#include "qsync/fft.hpp"

namespace qsync {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Wrap into (-tau/2, tau/2].
double wrap(double v, double tau) noexcept {
  double r = std::fmod(v, tau);
  if (r > tau / 2) r -= tau;
  if (r <= -tau / 2) r += tau;
  return r;
}

struct CircularMean {
  double center = 0.0;
  double resultant = 0.0;  // in [0, 1]
};

template <class Range>
CircularMean circular_mean(const Range& values, double tau) {
  double c = 0.0, s = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    c += std::cos(two_pi * v / tau);
    s += std::sin(two_pi * v / tau);
    ++n;
  }
  if (n == 0) return {};
  return {std::atan2(s, c) / two_pi * tau, std::hypot(c, s) / static_cast<double>(n)};
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Robust centre of values on a circle of circumference tau: circular mean,
// then the median of the values unwrapped around it.
std::optional<double> robust_center(const std::vector<double>& values, double tau) {
  const CircularMean cm = circular_mean(values, tau);
  if (cm.resultant < 0.1) return std::nullopt;
  std::vector<double> around(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    around[i] = cm.center + wrap(values[i] - cm.center, tau);
  return median(std::move(around));
}

LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                      const std::vector<double>& w) {
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    mx += w[i] * x[i];
    my += w[i] * y[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace

double phase_residual(double t_ps, double tau_ps, double phase_ref_ps) noexcept {
  return wrap(t_ps - phase_ref_ps, tau_ps);
}

double coarse_period_fft(const DetectionStream& stream, double tau_A_hint_ps,
                         const CoarseFftOptions& opt) {
  if (!(tau_A_hint_ps > 0.0)) throw Error(ErrorCode::invalid_argument, "tau_A hint must be > 0");
  if (opt.n_samples < 16) throw Error(ErrorCode::invalid_argument, "n_samples too small");
  if (stream.size() < opt.min_detections)
    throw Error(ErrorCode::too_few_detections, "stream has fewer detections than required");

  const double bin = tau_A_hint_ps / 4.0;
  const double window = bin * static_cast<double>(opt.n_samples);
  const std::int64_t t_first = stream.front().t_ps;
  if (static_cast<double>(stream.back().t_ps - t_first) < window)
    throw Error(ErrorCode::too_few_detections, "stream is shorter than the FFT sampling window");

  std::vector<double> counts(opt.n_samples, 0.0);
  std::size_t used = 0;
  for (const auto& r : stream) {
    const double dt = static_cast<double>(r.t_ps - t_first);
    if (dt >= window) break;
    const auto idx = static_cast<std::size_t>(dt / bin);
    if (idx < counts.size()) {
      counts[idx] += 1.0;
      ++used;
    }
  }
  if (used < opt.min_detections)
    throw Error(ErrorCode::too_few_detections, "too few detections inside the FFT window");

  const auto spectrum = fft::real_forward(counts);
  const double k0 = static_cast<double>(opt.n_samples) / 4.0;
  const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor(k0 * (1.0 - opt.search_window))));
  const auto hi = std::min(spectrum.size() - 1,
                           static_cast<std::size_t>(std::ceil(k0 * (1.0 + opt.search_window))));
  std::size_t peak = lo;
  double peak_power = -1.0;
  for (std::size_t k = lo; k <= hi; ++k) {
    const double p = std::norm(spectrum[k]);
    if (p > peak_power) {
      peak_power = p;
      peak = k;
    }
  }
  double noise = 0.0;
  std::size_t noise_bins = 0;
  for (std::size_t k = lo; k <= hi; ++k) {
    if (k + 2 >= peak && k <= peak + 2) continue;
    noise += std::norm(spectrum[k]);
    ++noise_bins;
  }
  noise = noise_bins ? noise / static_cast<double>(noise_bins) : 0.0;
  if (!(peak_power > opt.min_peak_ratio * noise))
    throw Error(ErrorCode::no_spectral_peak, "no periodic component near the expected frequency");
  return window / static_cast<double>(peak);
}

PeriodEstimate refine_period_lts(const DetectionStream& stream, double tau_B0_ps,
                                 const RefineOptions& opt,
                                 std::vector<SegmentDiagnostic>* diagnostics) {
  if (!(tau_B0_ps > 0.0)) throw Error(ErrorCode::invalid_argument, "tau_B0 must be > 0");
  if (stream.size() < std::max<std::size_t>(opt.min_detections, 2))
    throw Error(ErrorCode::too_few_detections, "too few detections for period refinement");
  if (!(opt.max_relative_slope > 0.0))
    throw Error(ErrorCode::invalid_argument, "max_relative_slope must be > 0");

  const double tau = tau_B0_ps;
  const std::int64_t t_first = stream.front().t_ps;
  const std::size_t n = stream.size();
  std::vector<double> x(n), phase(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(stream[i].t_ps - t_first);
    phase[i] = std::fmod(x[i], tau);
  }

  // Segment-wise unwrap: predict each segment's phase from the line through
  // the previous segment centres and measure the centre relative to it.
  const double seg_len = (tau / 4.0) / opt.max_relative_slope;
  std::vector<double> cx, cy, cw;
  LineFit line;
  bool have_line = false;
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  for (std::size_t i = 0; i < n;) {
    const double seg = std::floor(x[i] / seg_len);
    std::size_t j = i;
    while (j < n && std::floor(x[j] / seg_len) == seg) ++j;
    segments.emplace_back(i, j);
    i = j;
  }
  for (const auto& [b, e] : segments) {
    if (e - b < opt.min_segment_points) continue;
    double xmid = 0.0;
    for (std::size_t i = b; i < e; ++i) xmid += x[i];
    xmid /= static_cast<double>(e - b);
    std::vector<double> resid;
    resid.reserve(e - b);
    for (std::size_t i = b; i < e; ++i)
      resid.push_back(wrap(phase[i] - (have_line ? line(x[i]) : 0.0), tau));
    const auto offset = robust_center(resid, tau);
    if (!offset) continue;
    if (have_line && std::abs(*offset) > tau / 3.0)
      throw Error(ErrorCode::unwrap_failure,
                  "folded phase drifted too far between segments; use a finer coarse estimate");
    const double centre = (have_line ? line(xmid) : 0.0) + *offset;
    cx.push_back(xmid);
    cy.push_back(centre);
    cw.push_back(static_cast<double>(e - b));
    if (cx.size() == 1) {
      line = LineFit{};
      line.intercept = centre;
    } else {
      line = weighted_line(cx, cy, cw);
    }
    have_line = true;
  }
  if (!have_line)
    throw Error(ErrorCode::too_few_detections, "no segment holds a coherent phase cluster");

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = line(x[i]) + wrap(phase[i] - line(x[i]), tau);

  LtsOptions lts;
  lts.trim_fraction = opt.trim_fraction;
  lts.max_iterations = opt.max_iterations;
  const LineFit fit = lts_fit(x, y, lts, line);

  PeriodEstimate est;
  est.tau_B0_ps = tau_B0_ps;
  est.k = fit.slope;
  est.tau_B_ps = tau_B0_ps / (1.0 - fit.slope);
  est.n_samples = n;
  est.residual_std_ps = fit.residual_std;
  double origin = std::fmod(fit.intercept / (1.0 - fit.slope), est.tau_B_ps);
  if (origin < 0) origin += est.tau_B_ps;
  est.phase_origin_ps = static_cast<double>(t_first) + origin;

  if (diagnostics) {
    diagnostics->clear();
    for (const auto& [b, e] : segments) {
      if (e - b < 2) continue;
      const LineFit local = least_squares(std::span(x).subspan(b, e - b),
                                          std::span(y).subspan(b, e - b));
      SegmentDiagnostic d;
      d.t_start_ps = static_cast<double>(t_first) + x[b];
      d.t_end_ps = static_cast<double>(t_first) + x[e - 1];
      d.count = e - b;
      d.slope = local.slope;
      d.intercept_ps = local(x[b]);
      diagnostics->push_back(d);
    }
  }
  return est;
}

DetectionStream gate_filter(const DetectionStream& stream, const PeriodEstimate& est,
                            const GateConfig& gate, std::optional<double> phase_ref) {
  if (!(gate.sigma_g_ps > 0.0)) throw Error(ErrorCode::invalid_argument, "sigma_g must be > 0");
  if (!(est.tau_B_ps > 0.0)) throw Error(ErrorCode::invalid_argument, "invalid period estimate");
  const double ref = phase_ref.value_or(est.phase_origin_ps);
  const double radius = gate.acceptance * gate.sigma_g_ps;
  DetectionStream out;
  out.reserve(stream.size());
  for (const auto& r : stream)
    if (std::abs(phase_residual(static_cast<double>(r.t_ps), est.tau_B_ps, ref)) <= radius)
      out.push_back(r);
  if (out.empty()) throw Error(ErrorCode::empty_gate, "no detection falls inside the gate");
  return out;
}

double interval_error_statistic(const DetectionStream& stream, const PeriodEstimate& est,
                                std::size_t D, std::optional<double> phase_ref) {
  if (D == 0) throw Error(ErrorCode::invalid_argument, "D must be >= 1");
  if (stream.size() <= D) throw Error(ErrorCode::too_few_detections, "stream shorter than D + 1");
  const double ref = phase_ref.value_or(est.phase_origin_ps);
  std::vector<double> r(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i)
    r[i] = phase_residual(static_cast<double>(stream[i].t_ps), est.tau_B_ps, ref);
  double acc = 0.0;
  const std::size_t anchors = stream.size() - D;
  for (std::size_t a = 0; a < anchors; ++a)
    for (std::size_t b = 1; b <= D; ++b) {
      const double e = r[a + b] - r[a];
      acc += e * e;
    }
  return acc / static_cast<double>(anchors * D);
}

PathDelayEstimate estimate_path_delays(const DetectionStream& stream, const PeriodEstimate& est,
                                       std::size_t min_per_detector) {
  if (!(est.tau_B_ps > 0.0)) throw Error(ErrorCode::invalid_argument, "invalid period estimate");
  const double tau = est.tau_B_ps;
  std::array<std::vector<double>, 4> xs, rs;
  const double t_mid = stream.empty()
                           ? 0.0
                           : 0.5 * (static_cast<double>(stream.front().t_ps) +
                                    static_cast<double>(stream.back().t_ps));
  for (const auto& rec : stream) {
    const auto d = static_cast<std::size_t>(rec.detector);
    xs[d].push_back(static_cast<double>(rec.t_ps) - t_mid);
    rs[d].push_back(phase_residual(static_cast<double>(rec.t_ps), tau, est.phase_origin_ps));
  }
  PathDelayEstimate out;
  std::array<double, 4> intercept{};
  for (std::size_t d = 0; d < 4; ++d) {
    out.counts[d] = xs[d].size();
    if (xs[d].size() < std::max<std::size_t>(min_per_detector, 2))
      throw Error(ErrorCode::missing_detector,
                  std::string("detector ") + to_char(static_cast<Detector>(d)) + " has only " +
                      std::to_string(xs[d].size()) + " detections");
    const double c = circular_mean(rs[d], tau).center;
    for (auto& v : rs[d]) v = c + wrap(v - c, tau);
    intercept[d] = lts_fit(xs[d], rs[d]).intercept;
  }
  for (std::size_t d = 0; d < 4; ++d) {
    const double td = d == 0 ? 0.0 : wrap(intercept[d] - intercept[0], tau);
    out.delays.ps[d] = td;
    out.ambiguous[d] = std::abs(td) > tau / 4.0;
  }
  return out;
}

DetectionStream compensate_delays(const DetectionStream& stream, const PathDelays& delays) {
  DetectionStream out = stream;
  bool moved = false;
  for (auto& r : out) {
    const auto shift = static_cast<std::int64_t>(std::llround(delays[r.detector]));
    if (shift != 0) {
      r.t_ps -= shift;
      moved = true;
    }
  }
  if (moved)
    std::stable_sort(out.begin(), out.end(),
                     [](const DetectionRecord& a, const DetectionRecord& b) { return a.t_ps < b.t_ps; });
  return out;
}

std::vector<std::size_t> phase_histogram(const DetectionStream& stream, const PeriodEstimate& est,
                                         std::size_t bins) {
  if (bins == 0) throw Error(ErrorCode::invalid_argument, "histogram needs >= 1 bin");
  std::vector<std::size_t> h(bins, 0);
  const double tau = est.tau_B_ps;
  for (const auto& r : stream) {
    const double v = phase_residual(static_cast<double>(r.t_ps), tau, est.phase_origin_ps);
    auto idx = static_cast<std::size_t>((v + tau / 2) / tau * static_cast<double>(bins));
    h[std::min(idx, bins - 1)]++;
  }
  return h;
}

PeriodEstimate recover_period(const DetectionStream& stream, double tau_A_hint_ps,
                              const CoarseFftOptions& coarse, const RefineOptions& refine) {
  const double tau0 = coarse_period_fft(stream, tau_A_hint_ps, coarse);
  RefineOptions r = refine;
  r.max_relative_slope = std::max(r.max_relative_slope, 4.0 / static_cast<double>(coarse.n_samples));
  return refine_period_lts(stream, tau0, r);
}

}  // namespace qsync
