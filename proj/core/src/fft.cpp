#include "qsync/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "qsync/error.hpp"

namespace qsync::fft {
namespace {

// FFTW's planner is not re-entrant; execution on distinct plans is.
std::mutex planner_mutex;

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (!plan_) throw Error(ErrorCode::invalid_argument, "FFTW failed to create a plan");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

fftw_complex* as_fftw(cd* p) { return reinterpret_cast<fftw_complex*>(p); }

int sign(Direction dir) { return dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD; }

}  // namespace

std::vector<cd> real_forward(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  std::vector<double> in(x.begin(), x.end());
  std::vector<cd> out(n / 2 + 1);
  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex);
    raw = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), as_fftw(out.data()), FFTW_ESTIMATE);
  }
  Plan plan(raw);
  plan.execute();
  return out;
}

void transform(std::span<cd> x, Direction dir) {
  if (x.empty()) return;
  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex);
    raw = fftw_plan_dft_1d(static_cast<int>(x.size()), as_fftw(x.data()), as_fftw(x.data()),
                           sign(dir), FFTW_ESTIMATE);
  }
  Plan plan(raw);
  plan.execute();
}

void transform_2d(std::span<cd> x, std::size_t rows, std::size_t cols, Direction dir) {
  if (rows * cols != x.size())
    throw Error(ErrorCode::invalid_argument, "2-D transform shape does not match buffer");
  if (x.empty()) return;
  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex);
    raw = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), as_fftw(x.data()),
                           as_fftw(x.data()), sign(dir), FFTW_ESTIMATE);
  }
  Plan plan(raw);
  plan.execute();
}

void transform_rows(std::span<cd> x, std::size_t count, std::size_t n, Direction dir) {
  if (count * n != x.size())
    throw Error(ErrorCode::invalid_argument, "batched transform shape does not match buffer");
  if (x.empty()) return;
  int len = static_cast<int>(n);
  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex);
    raw = fftw_plan_many_dft(1, &len, static_cast<int>(count), as_fftw(x.data()), nullptr, 1, len,
                             as_fftw(x.data()), nullptr, 1, len, sign(dir), FFTW_ESTIMATE);
  }
  Plan plan(raw);
  plan.execute();
}

}  // namespace qsync::fft
