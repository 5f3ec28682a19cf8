// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include "cec/baselines.hpp"
#include "cec/parallel.hpp"

using namespace cec;

namespace {

std::vector<BsInstance> solve_set(std::size_t n) {
  InstanceParams p;
  p.min_tasks = 3;
  p.max_tasks = 8;
  p.horizon = 10;
  return random_bs_instances(11, n, p);
}

std::vector<BsInstance> oracle_set(std::size_t n) {
  InstanceParams p;
  p.min_tasks = 3;
  p.max_tasks = 3;
  return random_bs_instances(12, n, p);
}

void BM_solve_serial(benchmark::State& st) {
  const auto set = solve_set(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(solve_instances_serial(set, smith_provider()));
}

void BM_solve_parallel(benchmark::State& st) {
  const auto set = solve_set(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(solve_instances_parallel(set, smith_provider()));
}

void BM_oracle_serial(benchmark::State& st) {
  const auto set = oracle_set(st.range(0));
  for (auto _ : st)
    benchmark::DoNotOptimize(oracle_sweep_serial(set, {}, PlanFamily::Trimmed));
}

void BM_oracle_parallel(benchmark::State& st) {
  const auto set = oracle_set(st.range(0));
  for (auto _ : st)
    benchmark::DoNotOptimize(oracle_sweep_parallel(set, {}, PlanFamily::Trimmed));
}

std::vector<std::uint64_t> seeds(std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i + 1;
  return s;
}

SimConfig episode_config() {
  SimConfig c;
  c.workload.noise = 0.15;
  return c;
}

PolicyFactory greedy_factory() {
  return [](std::uint64_t) { return std::make_unique<GreedyPolicy>(); };
}

void BM_episodes_serial(benchmark::State& st) {
  const auto s = seeds(st.range(0));
  for (auto _ : st)
    benchmark::DoNotOptimize(run_episodes_serial(episode_config(), s, greedy_factory()));
}

void BM_episodes_parallel(benchmark::State& st) {
  const auto s = seeds(st.range(0));
  for (auto _ : st)
    benchmark::DoNotOptimize(run_episodes_parallel(episode_config(), s, greedy_factory()));
}

}  // namespace

BENCHMARK(BM_solve_serial)->Arg(256)->Arg(1024);
BENCHMARK(BM_solve_parallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_oracle_serial)->Arg(64);
BENCHMARK(BM_oracle_parallel)->Arg(64);
BENCHMARK(BM_episodes_serial)->Arg(4);
BENCHMARK(BM_episodes_parallel)->Arg(4);

BENCHMARK_MAIN();
