// Serial reference vs OpenMP for the data-parallel kernels.
// Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "ltpfleo/privacy_audit.hpp"
#include "ltpfleo/simulator.hpp"

using namespace ltp;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void BM_Visibility(benchmark::State& state) {
    VisibilityOptions opt;
    opt.exec = exec_of(state);
    for (auto _ : state) {
        auto s = compute_visibility(ConstellationSpec{}, GroundStation{}, 86400.0, opt);
        benchmark::DoNotOptimize(s.windows.data());
    }
}

const EventLog& audit_log() {
    static const EventLog log = [] {
        auto cfg = ltp::testing::smoke_config();
        cfg.rounds = 120;
        cfg.tolerance = StalenessTolerance::always_t();
        cfg.evaluate = false;
        return run(cfg).log;
    }();
    return log;
}

void BM_AuditWindows(benchmark::State& state) {
    const auto& log = audit_log();
    for (auto _ : state) {
        auto a = ltp_verdict_over_run(log, 2, 5, exec_of(state));
        benchmark::DoNotOptimize(a.windows.data());
    }
}

void BM_Replicas(benchmark::State& state) {
    auto cfg = ltp::testing::smoke_config();
    cfg.rounds = 40;
    cfg.tolerance = StalenessTolerance::always_t();
    for (auto _ : state) {
        auto r = run_replicas(cfg, 8, exec_of(state));
        benchmark::DoNotOptimize(r.data());
    }
}

}  // namespace

BENCHMARK(BM_Visibility)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AuditWindows)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Replicas)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
