#pragma once

// Stage-2 execution on one BS: given the tasks allocated to the BS and its
// offer, pick a processing order and the slots each task uses.
//
// A plan is sequential (task k+1 only uses slots after task k completed)
// and binary up to trimming: every used slot runs at full offered capacity
// except one trimmed slot per task that finishes the workload exactly.
// A slot is never shared between two tasks.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cec/core.hpp"

namespace cec {

struct ProcessingOrder {
  std::vector<int> sequence;  // positions into the task list

  bool is_permutation_of(std::size_t n) const;
  static ProcessingOrder identity(std::size_t n);
};

// Elementary-step counter for the complexity smoke test.
struct OpCounter {
  std::uint64_t ops = 0;
};

struct Fill {
  double cost = 0.0;
  std::vector<double> freq;  // full horizon length, zero outside the window
};

// Cheapest way to run `workload` cycles inside slot offsets [first, last]
// finishing at `last`: take whole slots in ascending price order, trim the
// last one taken. Absent when the window is too small or when the cheapest
// fill never touches `last`.
std::optional<Fill> cheapest_fill(const ResourceOffer& offer, int first, int last,
                                  double workload, const SlotGrid& grid,
                                  OpCounter* counter = nullptr);

struct ExecutionPlan {
  ProcessingOrder order;
  std::vector<bool> mask;                 // slot offset used by any task
  std::vector<std::vector<double>> freq;  // per input task; zeros if dropped
  std::vector<int> completion;            // offset per input task, -1 if dropped
  std::vector<int> dropped;               // input positions that were not run
  double total_surplus = 0.0;
  double latency_cost = 0.0;      // sum alpha * l over completed tasks
  double utilization_cost = 0.0;  // sum p * f over completed tasks
  double dropped_utility = 0.0;   // sum u0 over dropped tasks

  int completed() const;
  // Gamma_e = latency + utilization cost, plus the forfeited utility of
  // dropped tasks so that sum(u0 over all tasks) - Gamma_e = total_surplus.
  double execution_cost() const;
};

// Fills the cost breakdown and surplus of `plan` from its frequency vectors.
void summarize_plan(std::span<const OffloadRequest> tasks, const ResourceOffer& offer,
                    const SlotGrid& grid, ExecutionPlan& plan);

// Z(j, t1) dynamic program for a fixed order. The plan first maximizes the
// number of completed tasks, then total surplus; tasks that cannot fit are
// dropped with surplus 0.
ExecutionPlan dp_solve(std::span<const OffloadRequest> tasks,
                       const ProcessingOrder& order, const ResourceOffer& offer,
                       const SlotGrid& grid, OpCounter* counter = nullptr);

struct OracleLimits {
  int max_tasks = 4;
  int max_horizon = 8;
};

enum class PlanFamily {
  // The dp_solve family: disjoint slot sets per task, one trimmed slot each.
  Trimmed,
  // Strictly binary plans: a used slot is used (and paid) at full capacity.
  // Work streams through the used slots in processing order, so a task may
  // finish inside a slot whose remainder starts the next task.
  Binary,
};

// Exhaustive search over every order and every sequential slot assignment
// of the chosen family. Same objective as dp_solve: most completed tasks
// first, then highest surplus.
ExecutionPlan brute_force_best(std::span<const OffloadRequest> tasks,
                               const ResourceOffer& offer, const SlotGrid& grid,
                               OracleLimits limits = {},
                               PlanFamily family = PlanFamily::Trimmed);

// Descending alpha/w, then smaller w, then smaller task id.
ProcessingOrder smith_order(std::span<const OffloadRequest> tasks);

// |T| * max C * max p: the most surplus a trimmed binary plan can give up
// against an unrestricted execution decision.
double gap_bound(std::size_t task_count, const ResourceOffer& offer);
double gap_bound(std::span<const OffloadRequest> tasks, const ResourceOffer& offer);

using OrderProvider = std::function<ProcessingOrder(
    std::span<const OffloadRequest>, const ResourceOffer&, const SlotGrid&)>;

OrderProvider smith_provider();
OrderProvider explicit_provider(ProcessingOrder order);

ExecutionPlan solve_bs(std::span<const OffloadRequest> tasks,
                       const ResourceOffer& offer, const SlotGrid& grid,
                       const OrderProvider& provider);

// One scheme per input task; dropped tasks become rejections.
std::vector<SchedulingScheme> plan_schemes(std::span<const OffloadRequest> tasks,
                                           const ExecutionPlan& plan, int bs_id,
                                           const SlotGrid& grid);

// Stage 2 for a whole allocation: requests grouped by target BS (targets[i]
// belongs to requests[i], kReject allowed), each group solved by solve_bs on
// that BS's offer. Schemes come back in request order.
struct AllocationOutcome {
  std::vector<SchedulingScheme> schemes;
  double surplus = 0.0;
  double execution_cost = 0.0;  // latency + utilization of completed tasks
};

AllocationOutcome solve_allocation(std::span<const OffloadRequest> requests,
                                   std::span<const int> targets,
                                   std::span<const ResourceOffer> offers,
                                   const SlotGrid& grid, const OrderProvider& provider);

// Removes granted frequencies from an offer's capacity (prices are kept).
void consume(ResourceOffer& offer, std::span<const double> freq);

}  // namespace cec
