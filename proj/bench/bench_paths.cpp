// Serial reference vs OpenMP path loop on the same estimator.
#include "manydelta/mc.hpp"
#include "manydelta/model.hpp"
#include "manydelta/sde.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace manydelta;

namespace {

double terminal_spread(std::uint64_t seed, long i) {
    static const Configuration z0 = {{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2}};
    static const ModelParams p = ModelParams::uniform(3, 1.0);
    SimConfig sim;
    sim.t_max = 0.05;
    Stream s(seed, i);
    auto path = simulate_many_delta(z0, p, sim, s);
    double v = 0;
    for (auto c : separations(path.state(path.steps()))) v += std::abs(c);
    return v;
}

void BM_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(run_estimator_serial(terminal_spread, st.range(0), 1).mean);
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_parallel(benchmark::State& st) {
    const int workers = static_cast<int>(st.range(1));
    for (auto _ : st) benchmark::DoNotOptimize(run_estimator(terminal_spread, st.range(0), workers, 1).mean);
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_serial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_parallel)->Args({64, 1})->Args({64, 2})->Args({64, 4})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
