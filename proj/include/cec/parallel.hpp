#pragma once

// OpenMP kernels for the embarrassingly parallel parts: per-BS stage-2
// solves, oracle sweeps over instance sets, and independent episodes.
// Each has a serial reference that must give identical results.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "cec/exec_solver.hpp"
#include "cec/instances.hpp"
#include "cec/sim.hpp"

namespace cec {

// Number of worker threads OpenMP would use (1 without OpenMP).
int max_threads();

std::vector<ExecutionPlan> solve_instances_serial(std::span<const BsInstance> instances,
                                                  const OrderProvider& provider);
std::vector<ExecutionPlan> solve_instances_parallel(std::span<const BsInstance> instances,
                                                    const OrderProvider& provider);

std::vector<ExecutionPlan> oracle_sweep_serial(std::span<const BsInstance> instances,
                                               OracleLimits limits, PlanFamily family);
std::vector<ExecutionPlan> oracle_sweep_parallel(std::span<const BsInstance> instances,
                                                 OracleLimits limits, PlanFamily family);

// Builds a fresh policy for an episode seed; must not share mutable state
// between the policies it returns.
using PolicyFactory = std::function<std::unique_ptr<Policy>(std::uint64_t seed)>;

std::vector<EpisodeTrace> run_episodes_serial(const SimConfig& base,
                                              std::span<const std::uint64_t> seeds,
                                              const PolicyFactory& factory);
std::vector<EpisodeTrace> run_episodes_parallel(const SimConfig& base,
                                                std::span<const std::uint64_t> seeds,
                                                const PolicyFactory& factory);

}  // namespace cec
