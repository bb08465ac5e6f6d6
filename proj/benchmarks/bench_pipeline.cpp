#include <benchmark/benchmark.h>

#include "pinball/geometry.hpp"
#include "pinball/orbit_database.hpp"
#include "pinball/orbit_solver.hpp"
#include "pinball/spectrum.hpp"
#include "pinball/symbolic.hpp"

using namespace pinball;

namespace {

void BM_EnumerateWords(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_words(3, m));
}
BENCHMARK(BM_EnumerateWords)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_LocateOrbit(benchmark::State& state) {
  const auto config = Configuration::equilateral(6.0);
  std::string digits;
  for (int i = 0; i < state.range(0); ++i) digits += "1213"[i % 4];
  const auto w = Word::parse(digits);
  for (auto _ : state) benchmark::DoNotOptimize(locate_orbit(config, w));
}
BENCHMARK(BM_LocateOrbit)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_SweepOrbits(benchmark::State& state) {
  const auto config = Configuration::equilateral(6.0);
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sweep_orbits(config, m));
}
BENCHMARK(BM_SweepOrbits)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_BuildSpectrum(benchmark::State& state) {
  const auto config = Configuration::equilateral(6.0);
  const auto db = sweep_orbits(config, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_spectrum(db, db.coverage(), default_group_tol(db.d0)));
}
BENCHMARK(BM_BuildSpectrum)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
