// Serial reference assembly against the blocked OpenMP kernel.

#include "fe2/assembly.hpp"
#include "fe2/parallel.hpp"
#include "fe2/reference_assembly.hpp"
#include "fe2/solver.hpp"
#include "fe2/studies.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace fe2;

namespace {

const TwoScaleModel<2>& model() {
    static const TwoScaleModel<2> m = [] {
        CookSetup s;
        s.macro_nx = s.macro_ny = 4;
        s.rve_n = 10;
        return TwoScaleModel<2>(cook_problem(s));
    }();
    return m;
}

TwoScaleState<2> state() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TwoScaleState<2> s = model().initial_state();
    for (int d = 0; d < model().num_macro_dofs(); ++d) {
        if (model().macro_free_index(d) >= 0) s.q(d) += 2.0 * u(rng);
    }
    for (Eigen::Index i = 0; i < s.w.size(); ++i) s.w(i) = 0.01 * u(rng);
    return s;
}

void BM_ReferenceAssembly(benchmark::State& st) {
    const TwoScaleState<2> s = state();
    for (auto _ : st) {
        auto sys = reference::assemble(model(), s, 1.0, true);
        benchmark::DoNotOptimize(sys.residual.data());
    }
}

void BM_BlockedAssembly(benchmark::State& st) {
    set_threads(static_cast<int>(st.range(0)));
    const TwoScaleState<2> s = state();
    for (auto _ : st) {
        const BlockTangent t = assemble_tangent(model(), s);
        const Residuals r = assemble_residuals(model(), s);
        benchmark::DoNotOptimize(r.r_macro.data());
        benchmark::DoNotOptimize(t.K.nonZeros());
    }
}

void BM_BlockedResidual(benchmark::State& st) {
    set_threads(static_cast<int>(st.range(0)));
    const TwoScaleState<2> s = state();
    for (auto _ : st) {
        const Residuals r = assemble_residuals(model(), s);
        benchmark::DoNotOptimize(r.r_macro.data());
    }
}

void BM_ReferenceResidual(benchmark::State& st) {
    const TwoScaleState<2> s = state();
    for (auto _ : st) {
        auto sys = reference::assemble(model(), s, 1.0, false);
        benchmark::DoNotOptimize(sys.residual.data());
    }
}

void BM_CondensedIncrement(benchmark::State& st) {
    set_threads(static_cast<int>(st.range(0)));
    const TwoScaleState<2> s = state();
    for (auto _ : st) {
        const Increment inc = condensed_increment(model(), s, 1.0, Strategy::NullSpace);
        benchmark::DoNotOptimize(inc.dq.data());
    }
}

void thread_counts(benchmark::internal::Benchmark* b) {
    for (int t = 1; t <= max_threads(); t *= 2) b->Arg(t);
    if (max_threads() > 1 && (max_threads() & (max_threads() - 1))) b->Arg(max_threads());
}

}  // namespace

BENCHMARK(BM_ReferenceAssembly)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlockedAssembly)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ReferenceResidual)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlockedResidual)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CondensedIncrement)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
