#pragma once

// Greedy and Random benchmark schedulers. Both work on contiguous windows:
// starting at some slot, every slot runs at full remaining capacity and the
// slot that finishes the task is trimmed.
//
// In AllocOnly mode only their choice of BS is kept; execution is then
// re-solved per BS by the DP solver with the given order provider.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cec/exec_solver.hpp"
#include "cec/sim.hpp"

namespace cec {

enum class BaselineMode { Full, AllocOnly };

// Forward fill from offset `start`; absent when the horizon ends first.
std::optional<std::vector<double>> window_fill(const ResourceOffer& offer, int start,
                                               double workload, const SlotGrid& grid);

// Start offsets (with nonzero capacity) whose window completes the task.
std::vector<int> feasible_starts(const ResourceOffer& offer, double workload,
                                 const SlotGrid& grid);

class GreedyPolicy : public Policy {
 public:
  explicit GreedyPolicy(BaselineMode mode = BaselineMode::Full,
                        OrderProvider provider = smith_provider());
  std::string name() const override { return "greedy"; }
  SlotAction decide(const SystemState& state) override;

 private:
  BaselineMode mode_;
  OrderProvider provider_;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed, BaselineMode mode = BaselineMode::Full,
                        OrderProvider provider = smith_provider());
  std::string name() const override { return "random"; }
  SlotAction decide(const SystemState& state) override;

 private:
  std::mt19937_64 rng_;
  BaselineMode mode_;
  OrderProvider provider_;
};

}  // namespace cec
