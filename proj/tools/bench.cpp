// Serial reference kernels versus the blocked OpenMP kernels.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dyndisc/discovery.hpp"
#include "dyndisc/fnn.hpp"
#include "dyndisc/kernels.hpp"
#include "dyndisc/models.hpp"

using namespace dyndisc;

namespace {

struct Fixture {
  FnnParams params;
  ResidualLoss loss;
};

Fixture make_fixture(int N, int width) {
  const auto data = generate_trajectory(trig_model(), N);
  const auto spec = LossSpec::make(build_scheme(SchemeFamily::BDF, 2), true);
  return {init_params(FnnArchitecture::uniform(3, 3, width), 1), build_loss(data, 0, spec)};
}

template <auto Kernel>
void forward_bench(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(f.params, f.loss.points));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.loss.points.size()));
}

template <auto Kernel>
void gradient_bench(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(f.params, f.loss));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.loss.points.size()));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int N : {64, 256, 1024}) {
    for (int W : {64, 256}) b->Args({N, W});
  }
  b->ArgNames({"N", "W"});
}

}  // namespace

BENCHMARK(forward_bench<kernels::forward_serial>)->Name("forward/serial")->Apply(sizes);
BENCHMARK(forward_bench<kernels::forward_parallel>)->Name("forward/parallel")->Apply(sizes);
BENCHMARK(gradient_bench<kernels::loss_gradient_serial>)->Name("loss_gradient/serial")->Apply(sizes);
BENCHMARK(gradient_bench<kernels::loss_gradient_parallel>)->Name("loss_gradient/parallel")->Apply(sizes);

BENCHMARK_MAIN();
