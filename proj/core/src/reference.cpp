#include "qsync/reference.hpp"

#include <tuple>
#include <vector>

#include "qsync/error.hpp"

namespace qsync::reference {

double autocorrelation(std::span<const std::int8_t> bits, std::size_t lag) {
  const std::size_t n = bits.size();
  if (lag >= n) throw Error(ErrorCode::out_of_range, "lag >= L");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += bits[i];
  mean /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = bits[i] - mean;
    num += a * (bits[(i + lag) % n] - mean);
    den += a * a;
  }
  return den == 0.0 ? 0.0 : num / den;
}

DirectArgmax direct_correlation_argmax(std::span<const std::int8_t> received,
                                       const SyncString& s, const FrameLayout& layout) {
  const std::size_t nf = layout.frame_length();
  if (received.size() != nf || layout.L != s.size())
    throw Error(ErrorCode::layout_mismatch, "received string does not match layout");
  const std::size_t stride = layout.stride();
  const std::size_t L1 = s.params.L1;

  DirectArgmax best;
  bool have = false;
  for (std::size_t delta = 0; delta < nf; ++delta) {
    std::int64_t c = 0;
    for (std::size_t n = 0; n < nf; n += stride)
      c += static_cast<std::int64_t>(received[(n + delta) % nf]) * s.bits[n / stride];
    const std::size_t i0 = delta % stride;
    const std::size_t q = delta / stride;
    DirectArgmax cand{static_cast<int>(i0) + 1, q % L1, q / L1, delta, c};
    const bool better = !have || c > best.value ||
                        (c == best.value && std::tie(cand.i, cand.u, cand.j) <
                                                std::tie(best.i, best.u, best.j));
    if (better) {
      best = cand;
      have = true;
    }
  }
  return best;
}

}  // namespace qsync::reference
