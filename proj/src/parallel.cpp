#include "cec/parallel.hpp"

#include <exception>
#include <mutex>

#include <omp.h>

namespace cec {

int max_threads() { return omp_get_max_threads(); }

namespace {

// Runs body(i) for i in [0, n) across threads; the first exception thrown
// by any iteration is rethrown after the loop.
template <class Body>
void parallel_for(std::size_t n, Body body) {
  std::exception_ptr err;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

std::vector<ExecutionPlan> solve_instances_serial(std::span<const BsInstance> instances,
                                                  const OrderProvider& provider) {
  std::vector<ExecutionPlan> out;
  out.reserve(instances.size());
  for (const auto& inst : instances)
    out.push_back(solve_bs(inst.tasks, inst.offer, inst.grid, provider));
  return out;
}

std::vector<ExecutionPlan> solve_instances_parallel(std::span<const BsInstance> instances,
                                                    const OrderProvider& provider) {
  std::vector<ExecutionPlan> out(instances.size());
  parallel_for(instances.size(), [&](std::size_t i) {
    out[i] = solve_bs(instances[i].tasks, instances[i].offer, instances[i].grid, provider);
  });
  return out;
}

std::vector<ExecutionPlan> oracle_sweep_serial(std::span<const BsInstance> instances,
                                               OracleLimits limits, PlanFamily family) {
  std::vector<ExecutionPlan> out;
  out.reserve(instances.size());
  for (const auto& inst : instances)
    out.push_back(brute_force_best(inst.tasks, inst.offer, inst.grid, limits, family));
  return out;
}

std::vector<ExecutionPlan> oracle_sweep_parallel(std::span<const BsInstance> instances,
                                                 OracleLimits limits, PlanFamily family) {
  std::vector<ExecutionPlan> out(instances.size());
  parallel_for(instances.size(), [&](std::size_t i) {
    out[i] = brute_force_best(instances[i].tasks, instances[i].offer, instances[i].grid,
                              limits, family);
  });
  return out;
}

std::vector<EpisodeTrace> run_episodes_serial(const SimConfig& base,
                                              std::span<const std::uint64_t> seeds,
                                              const PolicyFactory& factory) {
  std::vector<EpisodeTrace> out;
  for (std::uint64_t seed : seeds) {
    SimConfig c = base;
    c.seed = seed;
    auto policy = factory(seed);
    out.push_back(run_episode(c, *policy));
  }
  return out;
}

std::vector<EpisodeTrace> run_episodes_parallel(const SimConfig& base,
                                                std::span<const std::uint64_t> seeds,
                                                const PolicyFactory& factory) {
  std::vector<EpisodeTrace> out(seeds.size());
  // Policies are built up front: factories may touch shared state.
  std::vector<std::unique_ptr<Policy>> policies;
  for (std::uint64_t seed : seeds) policies.push_back(factory(seed));
  parallel_for(seeds.size(), [&](std::size_t i) {
    SimConfig c = base;
    c.seed = seeds[i];
    out[i] = run_episode(c, *policies[i]);
  });
  return out;
}

}  // namespace cec
