#include "cec/baselines.hpp"

#include <limits>

#include "cec/errors.hpp"

namespace cec {

std::optional<std::vector<double>> window_fill(const ResourceOffer& offer, int start,
                                               double workload, const SlotGrid& grid) {
  std::vector<double> f(grid.horizon, 0.0);
  double rest = workload;
  for (int k = start; k < grid.horizon; ++k) {
    const double slot_work = offer.capacity[k] * grid.delta_t;
    if (slot_work <= 0.0) continue;
    if (slot_work >= rest * (1.0 - kWorkRelTol)) {
      f[k] = std::min(offer.capacity[k], rest / grid.delta_t);
      return f;
    }
    f[k] = offer.capacity[k];
    rest -= slot_work;
  }
  return std::nullopt;
}

std::vector<int> feasible_starts(const ResourceOffer& offer, double workload,
                                 const SlotGrid& grid) {
  std::vector<int> out;
  for (int a = 0; a < grid.horizon; ++a)
    if (offer.capacity[a] > 0.0 && window_fill(offer, a, workload, grid)) out.push_back(a);
  return out;
}

namespace {

// Turns the per-request choices into an action: either the windows
// themselves or the chosen BSs re-solved by the DP.
SlotAction finish(const SystemState& state, const std::vector<SchedulingScheme>& windows,
                  BaselineMode mode, const OrderProvider& provider) {
  if (mode == BaselineMode::Full) return SlotAction{windows};
  std::vector<int> targets;
  for (const auto& s : windows) targets.push_back(s.target);
  return SlotAction{
      solve_allocation(state.requests, targets, state.offers, state.grid, provider).schemes};
}

}  // namespace

GreedyPolicy::GreedyPolicy(BaselineMode mode, OrderProvider provider)
    : mode_(mode), provider_(std::move(provider)) {}

SlotAction GreedyPolicy::decide(const SystemState& state) {
  std::vector<ResourceOffer> remaining = state.offers;
  std::vector<SchedulingScheme> picks;
  for (const auto& req : state.requests) {
    double best = -std::numeric_limits<double>::infinity();
    int best_bs = -1;
    std::vector<double> best_f;
    for (std::size_t b = 0; b < remaining.size(); ++b) {
      for (int a = 0; a < state.grid.horizon; ++a) {
        if (remaining[b].capacity[a] <= 0.0) continue;
        auto f = window_fill(remaining[b], a, req.workload, state.grid);
        if (!f) break;  // later starts only have less room
        const double s = surplus(req, remaining[b], *f, state.grid);
        if (s > best) {
          best = s;
          best_bs = static_cast<int>(b);
          best_f = std::move(*f);
        }
      }
    }
    if (best_bs < 0 || best < 0.0) {
      picks.push_back(SchedulingScheme::reject(req.task_id, state.grid));
      continue;
    }
    consume(remaining[best_bs], best_f);
    picks.push_back({req.task_id, remaining[best_bs].bs_id, std::move(best_f)});
  }
  return finish(state, picks, mode_, provider_);
}

RandomPolicy::RandomPolicy(std::uint64_t seed, BaselineMode mode, OrderProvider provider)
    : rng_(seed), mode_(mode), provider_(std::move(provider)) {}

SlotAction RandomPolicy::decide(const SystemState& state) {
  std::vector<ResourceOffer> remaining = state.offers;
  std::vector<SchedulingScheme> picks;
  for (const auto& req : state.requests) {
    if (remaining.empty()) {
      picks.push_back(SchedulingScheme::reject(req.task_id, state.grid));
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick_bs(0, remaining.size() - 1);
    auto& offer = remaining[pick_bs(rng_)];
    const auto starts = feasible_starts(offer, req.workload, state.grid);
    if (starts.empty()) {
      picks.push_back(SchedulingScheme::reject(req.task_id, state.grid));
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
    auto f = *window_fill(offer, starts[pick_start(rng_)], req.workload, state.grid);
    consume(offer, f);
    picks.push_back({req.task_id, offer.bs_id, std::move(f)});
  }
  return finish(state, picks, mode_, provider_);
}

}  // namespace cec
