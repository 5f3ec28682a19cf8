#include "cec/exec_solver.hpp"

#include <algorithm>
#include <numeric>

#include "cec/errors.hpp"

namespace cec {

bool ProcessingOrder::is_permutation_of(std::size_t n) const {
  if (sequence.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (int i : sequence) {
    if (i < 0 || static_cast<std::size_t>(i) >= n || seen[i]) return false;
    seen[i] = true;
  }
  return true;
}

ProcessingOrder ProcessingOrder::identity(std::size_t n) {
  ProcessingOrder o;
  o.sequence.resize(n);
  std::iota(o.sequence.begin(), o.sequence.end(), 0);
  return o;
}

int ExecutionPlan::completed() const {
  return static_cast<int>(std::count_if(completion.begin(), completion.end(),
                                        [](int c) { return c >= 0; }));
}

double ExecutionPlan::execution_cost() const {
  return latency_cost + utilization_cost + dropped_utility;
}

std::optional<Fill> cheapest_fill(const ResourceOffer& offer, int first, int last,
                                  double workload, const SlotGrid& grid,
                                  OpCounter* counter) {
  const int h = grid.horizon;
  if (first < 0 || last >= h || first > last)
    throw InvalidInput("fill window outside the horizon");

  std::vector<int> slots(last - first + 1);
  std::iota(slots.begin(), slots.end(), first);
  std::uint64_t comparisons = 0;
  // Equal prices: earlier slot first.
  std::sort(slots.begin(), slots.end(), [&](int a, int b) {
    ++comparisons;
    if (offer.price[a] != offer.price[b]) return offer.price[a] < offer.price[b];
    return a < b;
  });
  if (counter) counter->ops += comparisons + slots.size();

  const double eps = kWorkRelTol * workload;
  double remaining = workload;
  Fill fill;
  fill.freq.assign(h, 0.0);
  for (int k : slots) {
    const double cap = offer.capacity[k];
    if (cap <= 0.0) continue;
    const double slot_work = cap * grid.delta_t;
    if (slot_work >= remaining - eps) {
      fill.freq[k] = std::min(cap, remaining / grid.delta_t);
      remaining = 0.0;
      break;
    }
    fill.freq[k] = cap;
    remaining -= slot_work;
  }
  if (remaining > 0.0 || fill.freq[last] <= 0.0) return std::nullopt;
  for (int k = first; k <= last; ++k) fill.cost += offer.price[k] * fill.freq[k];
  return fill;
}

void summarize_plan(std::span<const OffloadRequest> tasks, const ResourceOffer& offer,
                    const SlotGrid& grid, ExecutionPlan& plan) {
  plan.total_surplus = plan.latency_cost = plan.utilization_cost =
      plan.dropped_utility = 0.0;
  plan.mask.assign(grid.horizon, false);
  plan.dropped.clear();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (plan.completion[i] < 0) {
      plan.dropped.push_back(static_cast<int>(i));
      plan.dropped_utility += tasks[i].max_utility;
      continue;
    }
    const auto& f = plan.freq[i];
    const double l = static_cast<double>(latency_slots(f, tasks[i].workload, grid));
    const double cost = utilization_cost(offer.price, f);
    plan.latency_cost += tasks[i].latency_penalty * l;
    plan.utilization_cost += cost;
    plan.total_surplus += utility(tasks[i], l) - cost;
    for (int k = 0; k < grid.horizon; ++k)
      if (f[k] > 0.0) plan.mask[k] = true;
  }
}

namespace {

// Lexicographic objective: completed-task count, then surplus.
struct Score {
  int count = -1;
  double value = 0.0;

  bool valid() const { return count >= 0; }
};

bool better(const Score& a, const Score& b) {
  if (!a.valid()) return false;
  if (!b.valid()) return true;
  if (a.count != b.count) return a.count > b.count;
  return a.value > b.value;
}

ExecutionPlan empty_plan(std::size_t n, const ProcessingOrder& order,
                         const SlotGrid& grid) {
  ExecutionPlan plan;
  plan.order = order;
  plan.freq.assign(n, std::vector<double>(grid.horizon, 0.0));
  plan.completion.assign(n, -1);
  plan.mask.assign(grid.horizon, false);
  return plan;
}

void check_inputs(std::span<const OffloadRequest> tasks, const ResourceOffer& offer,
                  const SlotGrid& grid) {
  grid.validate();
  offer.validate(grid);
  for (const auto& t : tasks) t.validate();
}

}  // namespace

ExecutionPlan dp_solve(std::span<const OffloadRequest> tasks,
                       const ProcessingOrder& order, const ResourceOffer& offer,
                       const SlotGrid& grid, OpCounter* counter) {
  check_inputs(tasks, offer, grid);
  const std::size_t n = tasks.size();
  if (!order.is_permutation_of(n))
    throw InvalidInput("processing order is not a permutation of the tasks");
  const int h = grid.horizon;

  // State e + 1 where e in [-1, h-1] is the completion offset of the last
  // completed task (-1: nothing completed yet).
  struct Back {
    bool ran = false;
    int prev = 0;  // state index before this task
  };
  const int states = h + 1;
  std::vector<std::vector<Score>> z(n + 1, std::vector<Score>(states));
  std::vector<std::vector<Back>> back(n + 1, std::vector<Back>(states));
  z[0][0] = {0, 0.0};

  for (std::size_t j = 1; j <= n; ++j) {
    const OffloadRequest& task = tasks[order.sequence[j - 1]];
    for (int s = 0; s < states; ++s) {
      // Skip task j: keep the previous completion slot.
      Score best = z[j - 1][s];
      Back bp{false, s};
      const int e = s - 1;
      if (e >= 0) {
        const double utility_at_e = utility(task, static_cast<double>(e));
        for (int p = 0; p <= e; ++p) {  // p = t0 + 1
          if (counter) ++counter->ops;
          if (!z[j - 1][p].valid()) continue;
          auto fill = cheapest_fill(offer, p, e, task.workload, grid, counter);
          if (!fill) continue;
          Score cand{z[j - 1][p].count + 1,
                     z[j - 1][p].value + utility_at_e - fill->cost};
          if (better(cand, best)) {
            best = cand;
            bp = {true, p};
          }
        }
      }
      z[j][s] = best;
      back[j][s] = bp;
    }
  }

  int best_state = 0;
  for (int s = 1; s < states; ++s)
    if (better(z[n][s], z[n][best_state])) best_state = s;

  ExecutionPlan plan = empty_plan(n, order, grid);
  int s = best_state;
  for (std::size_t j = n; j >= 1; --j) {
    const Back& bp = back[j][s];
    if (bp.ran) {
      const int pos = order.sequence[j - 1];
      const int e = s - 1;
      auto fill = cheapest_fill(offer, bp.prev, e, tasks[pos].workload, grid);
      plan.freq[pos] = std::move(fill->freq);
      plan.completion[pos] = e;
    }
    s = bp.prev;
  }
  summarize_plan(tasks, offer, grid, plan);
  return plan;
}

namespace {

// Definition-1 binary plans. For each order, each set of executed tasks and
// each set of used slots, the used slots' full capacity is streamed to the
// executed tasks in order; task k completes where the stream first covers
// the cumulative workload of tasks 1..k. Every used slot is paid in full.
ExecutionPlan best_binary_plan(std::span<const OffloadRequest> tasks,
                               const ResourceOffer& offer, const SlotGrid& grid) {
  const int n = static_cast<int>(tasks.size());
  const int h = grid.horizon;
  ProcessingOrder perm = ProcessingOrder::identity(n);
  ExecutionPlan best = empty_plan(n, perm, grid);
  Score best_score{0, 0.0};
  bool have_best = false;

  std::vector<int> slots;
  std::vector<int> completion(n);
  do {
    for (unsigned run = 0; run < (1u << n); ++run) {
      for (unsigned used = 0; used < (1u << h); ++used) {
        slots.clear();
        double cost = 0.0;
        bool usable = true;
        for (int k = 0; k < h; ++k) {
          if (!(used >> k & 1u)) continue;
          if (offer.capacity[k] <= 0.0) usable = false;
          slots.push_back(k);
          cost += offer.price[k] * offer.capacity[k];
        }
        if (!usable) continue;
        std::fill(completion.begin(), completion.end(), -1);
        Score score{0, -cost};
        double stream = 0.0;  // cycles delivered so far
        double needed = 0.0;  // cumulative workload of executed tasks
        std::size_t next = 0;
        bool feasible = true;
        for (int k = 0; k < n && feasible; ++k) {
          const int pos = perm.sequence[k];
          if (!(run >> pos & 1u)) continue;
          needed += tasks[pos].workload;
          const double target = needed * (1.0 - kWorkRelTol);
          while (stream < target && next < slots.size())
            stream += offer.capacity[slots[next++]] * grid.delta_t;
          if (stream < target) {
            feasible = false;
            break;
          }
          const int e = slots[next - 1];
          completion[pos] = e;
          score.count += 1;
          score.value += utility(tasks[pos], static_cast<double>(e));
        }
        if (!feasible) continue;
        if (!have_best || better(score, best_score)) {
          have_best = true;
          best_score = score;
          best.order = perm;
          best.completion = completion;
          best.mask.assign(h, false);
          for (int k : slots) best.mask[k] = true;
          best.total_surplus = score.value;
        }
      }
    }
  } while (std::next_permutation(perm.sequence.begin(), perm.sequence.end()));

  // Per-task frequencies: split each used slot's capacity along the stream.
  best.freq.assign(n, std::vector<double>(h, 0.0));
  best.dropped.clear();
  best.latency_cost = best.dropped_utility = 0.0;
  best.utilization_cost = 0.0;
  for (int k = 0; k < h; ++k)
    if (best.mask[k]) best.utilization_cost += offer.price[k] * offer.capacity[k];
  std::vector<int> run_order;
  for (int pos : best.order.sequence) {
    if (best.completion[pos] >= 0)
      run_order.push_back(pos);
    else {
      best.dropped.push_back(pos);
      best.dropped_utility += tasks[pos].max_utility;
    }
  }
  std::size_t cur = 0;
  double left = run_order.empty() ? 0.0 : tasks[run_order[0]].workload;
  for (int k = 0; k < h && cur < run_order.size(); ++k) {
    if (!best.mask[k]) continue;
    double slot_work = offer.capacity[k] * grid.delta_t;
    while (slot_work > 0.0 && cur < run_order.size()) {
      const double take = std::min(slot_work, left);
      best.freq[run_order[cur]][k] += take / grid.delta_t;
      slot_work -= take;
      left -= take;
      if (left <= kWorkRelTol * tasks[run_order[cur]].workload) {
        best.latency_cost += tasks[run_order[cur]].latency_penalty *
                             static_cast<double>(best.completion[run_order[cur]]);
        ++cur;
        left = cur < run_order.size() ? tasks[run_order[cur]].workload : 0.0;
      }
    }
  }
  std::sort(best.dropped.begin(), best.dropped.end());
  return best;
}

}  // namespace

ExecutionPlan brute_force_best(std::span<const OffloadRequest> tasks,
                               const ResourceOffer& offer, const SlotGrid& grid,
                               OracleLimits limits, PlanFamily family) {
  check_inputs(tasks, offer, grid);
  const int n = static_cast<int>(tasks.size());
  const int h = grid.horizon;
  if (n > limits.max_tasks || h > limits.max_horizon)
    throw InstanceTooLarge("oracle limited to " + std::to_string(limits.max_tasks) +
                           " tasks and " + std::to_string(limits.max_horizon) +
                           " slots");
  if (family == PlanFamily::Binary) return best_binary_plan(tasks, offer, grid);

  ProcessingOrder perm = ProcessingOrder::identity(n);
  Score best_score{0, 0.0};
  bool have_best = false;
  ExecutionPlan best = empty_plan(n, perm, grid);

  std::vector<std::vector<double>> freq(n, std::vector<double>(h, 0.0));
  std::vector<int> completion(n, -1);

  // Depth-first over tasks in permutation order. `start` is the first slot
  // not yet claimed by an earlier task.
  auto search = [&](auto&& self, int k, int start, Score acc) -> void {
    if (k == n) {
      if (!have_best || better(acc, best_score)) {
        have_best = true;
        best_score = acc;
        best.order = perm;
        best.freq = freq;
        best.completion = completion;
      }
      return;
    }
    const int pos = perm.sequence[k];
    const OffloadRequest& task = tasks[pos];
    self(self, k + 1, start, acc);  // dropped

    const int free_slots = h - start;
    if (free_slots <= 0) return;
    const double eps = kWorkRelTol * task.workload;
    for (unsigned bits = 1; bits < (1u << free_slots); ++bits) {
      bool usable = true;
      int last = start;
      double full_work = 0.0;
      for (int b = 0; b < free_slots; ++b) {
        if (!(bits >> b & 1u)) continue;
        const int slot = start + b;
        if (offer.capacity[slot] <= 0.0) usable = false;
        full_work += offer.capacity[slot] * grid.delta_t;
        last = slot;
      }
      if (!usable || full_work < task.workload - eps) continue;
      for (int b = 0; b < free_slots; ++b) {
        if (!(bits >> b & 1u)) continue;
        const int trimmed = start + b;
        const double trimmed_cap = offer.capacity[trimmed] * grid.delta_t;
        const double rest = task.workload - (full_work - trimmed_cap);
        if (rest <= eps || rest > trimmed_cap + eps) continue;
        auto& f = freq[pos];
        std::fill(f.begin(), f.end(), 0.0);
        double cost = 0.0;
        for (int c = 0; c < free_slots; ++c) {
          if (!(bits >> c & 1u)) continue;
          const int slot = start + c;
          f[slot] = slot == trimmed
                        ? std::min(offer.capacity[slot], rest / grid.delta_t)
                        : offer.capacity[slot];
          cost += offer.price[slot] * f[slot];
        }
        completion[pos] = last;
        const double r = task.max_utility -
                         task.latency_penalty * static_cast<double>(last) - cost;
        self(self, k + 1, last + 1, Score{acc.count + 1, acc.value + r});
      }
      completion[pos] = -1;
      std::fill(freq[pos].begin(), freq[pos].end(), 0.0);
    }
  };

  do {
    search(search, 0, 0, Score{0, 0.0});
  } while (std::next_permutation(perm.sequence.begin(), perm.sequence.end()));

  summarize_plan(tasks, offer, grid, best);
  return best;
}

ProcessingOrder smith_order(std::span<const OffloadRequest> tasks) {
  ProcessingOrder o = ProcessingOrder::identity(tasks.size());
  std::sort(o.sequence.begin(), o.sequence.end(), [&](int a, int b) {
    const auto& x = tasks[a];
    const auto& y = tasks[b];
    // alpha_x / w_x vs alpha_y / w_y without dividing.
    const double lhs = x.latency_penalty * y.workload;
    const double rhs = y.latency_penalty * x.workload;
    if (lhs != rhs) return lhs > rhs;
    if (x.workload != y.workload) return x.workload < y.workload;
    return x.task_id < y.task_id;
  });
  return o;
}

double gap_bound(std::size_t task_count, const ResourceOffer& offer) {
  return static_cast<double>(task_count) * offer.max_capacity() * offer.max_price();
}

double gap_bound(std::span<const OffloadRequest> tasks, const ResourceOffer& offer) {
  return gap_bound(tasks.size(), offer);
}

OrderProvider smith_provider() {
  return [](std::span<const OffloadRequest> tasks, const ResourceOffer&,
            const SlotGrid&) { return smith_order(tasks); };
}

OrderProvider explicit_provider(ProcessingOrder order) {
  return [order = std::move(order)](std::span<const OffloadRequest> tasks,
                                    const ResourceOffer&, const SlotGrid&) {
    if (!order.is_permutation_of(tasks.size()))
      throw InvalidInput("explicit order does not match the task count");
    return order;
  };
}

ExecutionPlan solve_bs(std::span<const OffloadRequest> tasks,
                       const ResourceOffer& offer, const SlotGrid& grid,
                       const OrderProvider& provider) {
  if (tasks.empty()) {
    ExecutionPlan plan = empty_plan(0, ProcessingOrder{}, grid);
    return plan;
  }
  return dp_solve(tasks, provider(tasks, offer, grid), offer, grid);
}

std::vector<SchedulingScheme> plan_schemes(std::span<const OffloadRequest> tasks,
                                           const ExecutionPlan& plan, int bs_id,
                                           const SlotGrid& grid) {
  std::vector<SchedulingScheme> out;
  out.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (plan.completion[i] < 0)
      out.push_back(SchedulingScheme::reject(tasks[i].task_id, grid));
    else
      out.push_back({tasks[i].task_id, bs_id, plan.freq[i]});
  }
  return out;
}

AllocationOutcome solve_allocation(std::span<const OffloadRequest> requests,
                                   std::span<const int> targets,
                                   std::span<const ResourceOffer> offers,
                                   const SlotGrid& grid, const OrderProvider& provider) {
  if (targets.size() != requests.size())
    throw ShapeMismatch("one target per request required");
  AllocationOutcome out;
  out.schemes.reserve(requests.size());
  for (const auto& r : requests) out.schemes.push_back(SchedulingScheme::reject(r.task_id, grid));
  for (const auto& offer : offers) {
    std::vector<OffloadRequest> mine;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < requests.size(); ++i)
      if (targets[i] == offer.bs_id) {
        mine.push_back(requests[i]);
        where.push_back(i);
      }
    if (mine.empty()) continue;
    const ExecutionPlan plan = solve_bs(mine, offer, grid, provider);
    auto schemes = plan_schemes(mine, plan, offer.bs_id, grid);
    for (std::size_t k = 0; k < mine.size(); ++k) out.schemes[where[k]] = std::move(schemes[k]);
    out.surplus += plan.total_surplus;
    out.execution_cost += plan.latency_cost + plan.utilization_cost;
  }
  for (int t : targets)
    if (t != kReject && std::none_of(offers.begin(), offers.end(),
                                     [&](const ResourceOffer& o) { return o.bs_id == t; }))
      throw InvalidInput("allocation targets unknown BS " + std::to_string(t));
  return out;
}

void consume(ResourceOffer& offer, std::span<const double> freq) {
  if (freq.size() != offer.capacity.size()) throw ShapeMismatch("frequency length");
  for (std::size_t k = 0; k < freq.size(); ++k)
    offer.capacity[k] = std::max(0.0, offer.capacity[k] - freq[k]);
}

}  // namespace cec
