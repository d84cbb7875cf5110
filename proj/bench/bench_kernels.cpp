// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <numbers>
#include <random>

#include "lusline/cauchy.hpp"
#include "lusline/radon.hpp"

using namespace lusline;

namespace {

Image random_image(int m) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Image img(m, m);
  for (double& v : img.flat()) v = uni(rng);
  return img;
}

radon::RadonMap random_map(int m) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  radon::RadonMap map(m, radon::AngleGrid());
  for (double& v : map.values()) v = uni(rng);
  return map;
}

void BM_Forward(benchmark::State& state) {
  const Image img = random_image(static_cast<int>(state.range(0)));
  const radon::AngleGrid grid;
  for (auto _ : state) benchmark::DoNotOptimize(radon::forward_radon(img, grid));
}

void BM_ForwardReference(benchmark::State& state) {
  const Image img = random_image(static_cast<int>(state.range(0)));
  const radon::AngleGrid grid;
  for (auto _ : state) benchmark::DoNotOptimize(radon::reference::forward_radon(img, grid));
}

void BM_BackProject(benchmark::State& state) {
  const auto map = random_map(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(radon::back_project(map));
}

void BM_BackProjectReference(benchmark::State& state) {
  const auto map = random_map(static_cast<int>(state.range(0)));
  const double scale = std::numbers::pi / map.angles();
  for (auto _ : state) benchmark::DoNotOptimize(radon::reference::back_project(map, scale));
}

void BM_Ramp(benchmark::State& state) {
  const auto map = random_map(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(radon::ramp_filter(map));
}

void BM_RampReference(benchmark::State& state) {
  const auto map = random_map(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(radon::reference::ramp_filter(map));
}

void BM_Prox(benchmark::State& state) {
  const auto map = random_map(static_cast<int>(state.range(0)));
  const cauchy::CauchyParams p(0.5, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(cauchy::prox_map(map, p));
}

void BM_ProxReference(benchmark::State& state) {
  const auto map = random_map(static_cast<int>(state.range(0)));
  const cauchy::CauchyParams p(0.5, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(cauchy::reference::prox_map(map, p));
}

}  // namespace

BENCHMARK(BM_Forward)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardReference)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackProject)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackProjectReference)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ramp)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RampReference)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Prox)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProxReference)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
