#include <benchmark/benchmark.h>

#include <vector>

#include "tpd/engine.hpp"
#include "tpd/synthetic.hpp"
#include "tpd/term_library.hpp"
#include "tpd/trainer.hpp"

// Serial reference kernels vs the OpenMP ones, on production-sized work.

namespace {

using namespace tpd;

struct Fixture {
    FieldTriplet nets = init_networks(1);
    std::vector<GridPoint> points;
    TermLibrary lib = enumerate_terms(2, 2);
    Fixture() {
        for (int i = 0; i < 2410; ++i)
            points.push_back({-1.0 + 2.0 * (i % 241) / 240.0, -1.0 + 2.0 * (i / 241) / 9.0});
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

void BM_state_batch(benchmark::State& state, par::Mode mode) {
    Fixture& f = fixture();
    std::vector<StateAtPoint> out(f.points.size());
    for (auto _ : state) {
        evaluate_states(f.nets, f.points, out, mode);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(f.points.size()));
}

void BM_epoch_gradient(benchmark::State& state, par::Mode mode) {
    Fixture& f = fixture();
    for (auto _ : state) {
        auto grad = parameter_gradient(
            f.nets, f.points,
            [](std::size_t, const StateAtPoint& s) {
                StateAdjoint adj;
                adj.o = 2 * s.o;
                adj.o_t = s.o_t;
                adj.o_xx = 0.1 * s.o_xx;
                return adj;
            },
            mode);
        benchmark::DoNotOptimize(grad.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(f.points.size()));
}

void BM_theta(benchmark::State& state) {
    Fixture& f = fixture();
    std::vector<double> theta(f.lib.size());
    std::array<double, 9> vars{0.5, -0.2, 0.8, 1.2, -0.7, 0.3, 0.9, -1.1, 0.6};
    for (auto _ : state) {
        evaluate_theta(f.lib, vars, theta);
        benchmark::DoNotOptimize(theta.data());
    }
}

void BM_simulator(benchmark::State& state) {
    const SyntheticScenario sc = SyntheticScenario::defaults(1);
    const PlantedPDE pde = PlantedPDE::advection_diffusion(0.5, 0.05);
    for (auto _ : state) {
        const CleanFields f = simulate(pde, sc);
        benchmark::DoNotOptimize(f.o.data());
    }
}

}  // namespace

BENCHMARK_CAPTURE(BM_state_batch, serial, tpd::par::Mode::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_state_batch, openmp, tpd::par::Mode::OpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_epoch_gradient, serial, tpd::par::Mode::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_epoch_gradient, openmp, tpd::par::Mode::OpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_theta);
BENCHMARK(BM_simulator)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
