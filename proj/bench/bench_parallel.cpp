#include <cstdint>
#include <numeric>
#include <vector>

#include <benchmark/benchmark.h>

#include "riskmpc/config.hpp"
#include "riskmpc/risk_map.hpp"
#include "riskmpc/sim.hpp"

using namespace riskmpc;

namespace {

struct MapInputs {
  GridSpec spec;
  CounterfactualEgo ego{{15, 0}, {}, {}};
  std::vector<NoisyAgentState> others;
  std::vector<RiskParams> params;

  MapInputs() {
    for (int k = 0; k < 4; ++k) {
      others.push_back({{30.0 + 20 * k, -4.0 + 4 * (k % 3)}, {10.0 + k, 0.0}, {0.1, 0.1}, {0.1, 0.1}});
      params.push_back({1.0, 0.1, 2.0, 5.0, 0.0});
    }
  }
};

void BM_RiskMapSerial(benchmark::State& state) {
  const MapInputs in;
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_risk_map_serial(in.spec, in.ego, in.others, in.params));
  }
  state.SetItemsProcessed(state.iterations() * in.spec.nx * in.spec.ny);
}

void BM_RiskMapParallel(benchmark::State& state) {
  const MapInputs in;
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_risk_map(in.spec, in.ego, in.others, in.params));
  }
  state.SetItemsProcessed(state.iterations() * in.spec.nx * in.spec.ny);
}

template <bool Parallel>
void BM_Batch(benchmark::State& state) {
  RunConfig c = load_config(RISKMPC_DATA_DIR "/canonical.json");
  c.sim.steps = 50;
  const HighwayScene base = build_scene(c);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(state.range(0)));
  std::iota(seeds.begin(), seeds.end(), 1);
  const MpcConfig mpc = effective_mpc(c);
  for (auto _ : state) {
    const BatchResult r = Parallel ? run_batch(base, c.sim, mpc, c.risk, c.scene.placement, seeds)
                                   : run_batch_serial(base, c.sim, mpc, c.risk, c.scene.placement, seeds);
    benchmark::DoNotOptimize(r.summary.min_dist.mean);
  }
}

}  // namespace

BENCHMARK(BM_RiskMapSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RiskMapParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Batch<false>)->Name("BM_BatchSerial")->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Batch<true>)->Name("BM_BatchParallel")->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
