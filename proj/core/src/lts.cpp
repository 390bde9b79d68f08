#include "qsync/lts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qsync/error.hpp"
#include "qsync/rng.hpp"

namespace qsync {
namespace {

LineFit fit_subset(std::span<const double> x, std::span<const double> y,
                   std::span<const std::size_t> idx) {
  const double n = static_cast<double>(idx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i : idx) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i : idx) {
    const double dx = x[i] - mx;
    sxx += dx * dx;
    sxy += dx * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.n_used = idx.size();
  return f;
}

double trimmed_objective(std::span<const double> x, std::span<const double> y, const LineFit& f,
                         std::size_t h, std::vector<double>& scratch) {
  scratch.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f(x[i]);
    scratch[i] = r * r;
  }
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(h - 1),
                   scratch.end());
  return std::accumulate(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(h), 0.0);
}

struct Candidate {
  LineFit fit;
  double objective;
};

Candidate concentrate(std::span<const double> x, std::span<const double> y, LineFit fit,
                      std::size_t h, std::size_t max_iter) {
  std::vector<double> scratch;
  double best = trimmed_objective(x, y, fit, h, scratch);
  std::size_t it = 0;
  while (it < max_iter) {
    const auto idx = trimmed_subset(x, y, fit, h);
    LineFit next = fit_subset(x, y, idx);
    ++it;
    const double obj = trimmed_objective(x, y, next, h, scratch);
    if (!(obj < best)) break;
    best = obj;
    fit = next;
  }
  fit.iterations = it;
  fit.n_used = h;
  return {fit, best};
}

}  // namespace

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::invalid_argument, "x and y sizes differ");
  if (x.size() < 2) throw Error(ErrorCode::too_few_detections, "line fit needs >= 2 points");
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return fit_subset(x, y, idx);
}

std::vector<std::size_t> trimmed_subset(std::span<const double> x, std::span<const double> y,
                                        const LineFit& fit, std::size_t h) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (h >= idx.size()) return idx;
  std::vector<double> r2(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit(x[i]);
    r2[i] = r * r;
  }
  // Ties broken by index so the subset is deterministic.
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(h), idx.end(),
                   [&](std::size_t a, std::size_t b) {
                     return r2[a] < r2[b] || (r2[a] == r2[b] && a < b);
                   });
  idx.resize(h);
  std::sort(idx.begin(), idx.end());
  return idx;
}

LineFit lts_fit(std::span<const double> x, std::span<const double> y, const LtsOptions& opt,
                std::optional<LineFit> start) {
  if (x.size() != y.size()) throw Error(ErrorCode::invalid_argument, "x and y sizes differ");
  if (x.size() < 2) throw Error(ErrorCode::too_few_detections, "LTS needs >= 2 points");
  if (!(opt.trim_fraction >= 0.0 && opt.trim_fraction < 1.0))
    throw Error(ErrorCode::invalid_argument, "trim fraction must lie in [0, 1)");
  const std::size_t n = x.size();
  const auto h = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil((1.0 - opt.trim_fraction) * static_cast<double>(n))), 2,
      n);

  std::vector<LineFit> starts;
  if (start) starts.push_back(*start);
  starts.push_back(least_squares(x, y));
  const CounterRng rng{opt.seed};
  for (std::size_t s = 0; s < opt.elemental_starts; ++s) {
    const auto a = static_cast<std::size_t>(rng.bits(7, 2 * s) % n);
    const auto b = static_cast<std::size_t>(rng.bits(7, 2 * s + 1) % n);
    if (a == b || x[a] == x[b]) continue;
    LineFit f;
    f.slope = (y[b] - y[a]) / (x[b] - x[a]);
    f.intercept = y[a] - f.slope * x[a];
    starts.push_back(f);
  }

  // Two concentration steps per start, then full concentration on the best few.
  std::vector<Candidate> cands;
  cands.reserve(starts.size());
  for (const auto& s : starts) cands.push_back(concentrate(x, y, s, h, 2));
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.objective < b.objective; });
  cands.resize(std::min<std::size_t>(cands.size(), 3));
  Candidate best{{}, std::numeric_limits<double>::infinity()};
  for (const auto& c : cands) {
    Candidate full = concentrate(x, y, c.fit, h, opt.max_iterations);
    full.fit.iterations += c.fit.iterations;
    if (full.objective < best.objective) best = full;
  }

  std::vector<double> absr(n);
  for (std::size_t i = 0; i < n; ++i) absr[i] = std::abs(y[i] - best.fit(x[i]));
  std::nth_element(absr.begin(), absr.begin() + static_cast<std::ptrdiff_t>(n / 2), absr.end());
  best.fit.residual_std = 1.4826 * absr[n / 2];
  best.fit.n_used = h;
  return best.fit;
}

}  // namespace qsync
