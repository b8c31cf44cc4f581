#include <benchmark/benchmark.h>

#include <vector>

#include <irtvuong/estimation.hpp>
#include <irtvuong/quadform.hpp>
#include <irtvuong/simgen.hpp>
#include <irtvuong/vuong.hpp>

using namespace irtvuong;

static void BM_EStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SimDesign d = preset_design("hybrid", n, 10, 1, 1);
  ResponseMatrix data = generate(d, 0).data;
  ModelSpec spec = make_spec(Family::Grm, data.shape());
  MarginalEngine engine(spec, data);
  ParameterVector x = start_values(spec, data);
  for (auto _ : state) benchmark::DoNotOptimize(engine.e_step(x));
  state.counters["patterns"] = engine.n_patterns();
}
BENCHMARK(BM_EStep)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_EStep2D(benchmark::State& state) {
  SimDesign d = preset_design("2pl-2d2pl", 2000, 10, 1, 1);
  ResponseMatrix data = generate(d, 0).data;
  ModelSpec spec = make_spec(Family::MdTwoPL, data.shape(), 2);
  MarginalEngine engine(spec, data);
  ParameterVector x = start_values(spec, data);
  for (auto _ : state) benchmark::DoNotOptimize(engine.e_step(x));
}
BENCHMARK(BM_EStep2D)->Unit(benchmark::kMillisecond);

static void BM_FitEm(benchmark::State& state) {
  const Family family = state.range(0) == 0 ? Family::Grm : Family::Gpcm;
  SimDesign d = preset_design("hybrid", 1000, 10, 1, 3);
  ResponseMatrix data = generate(d, 0).data;
  ModelSpec spec = make_spec(family, data.shape());
  for (auto _ : state) benchmark::DoNotOptimize(fit_em(spec, data).total_loglik);
}
BENCHMARK(BM_FitEm)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_Replication(benchmark::State& state) {
  SimDesign d = preset_design("twin-2pl", 500, 10, 1, 5);
  int rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_replication(d, rep++).dist_p);
}
BENCHMARK(BM_Replication)->Unit(benchmark::kMillisecond);

static void BM_UpperTail(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  std::vector<double> w;
  for (int i = 0; i < k; ++i) w.push_back(1.0 / (1.0 + i) * (i % 3 == 2 ? -1.0 : 1.0));
  double x = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(upper_tail(w, x));
    x = x > 20.0 ? 0.5 : x + 0.7;
  }
}
BENCHMARK(BM_UpperTail)->Arg(2)->Arg(10)->Arg(40)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
