#include <benchmark/benchmark.h>

#include "qsync/channel.hpp"
#include "qsync/clock_recovery.hpp"
#include "qsync/offset_recovery.hpp"
#include "qsync/rng.hpp"

namespace {

using namespace qsync;

void BM_GenerateSyncString(benchmark::State& state) {
  const auto N1 = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_sync_string({1000, N1, 1.0, 1}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(1000 * N1));
}
BENCHMARK(BM_GenerateSyncString)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Autocorrelation(benchmark::State& state) {
  const auto s = generate_sync_string({1000, 100, 1.0, 1});
  for (auto _ : state) benchmark::DoNotOptimize(autocorrelation_all(s));
}
BENCHMARK(BM_Autocorrelation)->Unit(benchmark::kMillisecond);

RowDecomposition random_rows(const SyncString& s, const FrameLayout& layout, double keep) {
  const CounterRng rng{5};
  std::vector<std::int8_t> b(layout.frame_length(), 0);
  for (std::size_t n = 0; n < b.size(); ++n)
    if (rng.uniform(0, n) < keep) b[n] = (rng.bits(1, n) & 1) ? 1 : -1;
  return separate_rows(b, layout);
}

void BM_FindOffset(benchmark::State& state) {
  const auto s = generate_sync_string({1000, 100, 1.0, 1});
  const auto layout = build_layout(1, s);
  const auto rows = random_rows(s, layout, 0.005);
  const auto mode = state.range(0) ? Stage2Search::exhaustive : Stage2Search::stage1_optimum;
  for (auto _ : state) benchmark::DoNotOptimize(find_offset(rows, s, 20000.0, {mode, 5.0}));
}
BENCHMARK(BM_FindOffset)->ArgName("exhaustive")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

DetectionStream stream_for(std::size_t frames) {
  const auto s = generate_sync_string({1000, 100, 1.0, 1});
  const Scenario sc = scenario_presets("table1_loss20.0");
  const FrameSchedule schedule(build_layout(1, s), s, frames, 3);
  return transmit(schedule, sc.clock, sc.channel, {}, 4);
}

void BM_Transmit(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(stream_for(frames));
}
BENCHMARK(BM_Transmit)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_RecoverPeriod(benchmark::State& state) {
  const auto stream = stream_for(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(recover_period(stream, 20000.0));
  state.counters["detections"] = static_cast<double>(stream.size());
}
BENCHMARK(BM_RecoverPeriod)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
