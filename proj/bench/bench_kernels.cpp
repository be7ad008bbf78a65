// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to vary the parallel width.

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "sesid/cpl.hpp"
#include "sesid/kernels.hpp"
#include "sesid/lure.hpp"

namespace {

using namespace sesid;

struct RegressionInput {
  std::vector<double> y, v;
  CplPartition partition{uniform_breakpoints(-10.0, 1.0, 10.0), 10};
  kernels::RegressionLayout layout;

  explicit RegressionInput(std::size_t length) {
    v = gaussian_sequence(length, 5.0, std::sqrt(1.5), 1);
    y = gaussian_sequence(length, 0.0, 4.0, 2);
    layout.n_hat = 12;
    layout.d_hat = 4;
    layout.lower = 100;
    layout.upper = length - 1;
  }
};

std::vector<double> hann(std::size_t len) {
  std::vector<double> w(len);
  for (std::size_t i = 0; i < len; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(len));
  }
  return w;
}

void BM_RegressionRowsSerial(benchmark::State& state) {
  const RegressionInput in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::reference::regression_rows(in.y, in.v, in.partition, in.layout));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(in.layout.rows()));
}

void BM_RegressionRowsOpenMP(benchmark::State& state) {
  const RegressionInput in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::regression_rows(in.y, in.v, in.partition, in.layout));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(in.layout.rows()));
}

void BM_WelchSerial(benchmark::State& state) {
  const auto x = gaussian_sequence(static_cast<std::size_t>(state.range(0)), 0.0, 1.0, 3);
  const auto w = hann(4096);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::reference::welch_power_sum(x, 4096, 2048, w));
  }
}

void BM_WelchOpenMP(benchmark::State& state) {
  const auto x = gaussian_sequence(static_cast<std::size_t>(state.range(0)), 0.0, 1.0, 3);
  const auto w = hann(4096);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::welch_power_sum(x, 4096, 2048, w));
  }
}

}  // namespace

BENCHMARK(BM_RegressionRowsSerial)->Arg(25000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegressionRowsOpenMP)->Arg(25000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WelchSerial)->Arg(100000)->Arg(400000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WelchOpenMP)->Arg(100000)->Arg(400000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
