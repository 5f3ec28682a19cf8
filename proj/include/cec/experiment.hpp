#pragma once

// Experiment matrix: every (N, policy) cell is run over the same list of
// environment seeds so policies see identical request and offer streams.
// Three views are recorded: "stage1" (allocation only, execution by the DP
// with smith_order), "global" (each policy end to end) and "stage2" (mean
// execution cost of the learned order against smith_order).

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cec/alloc_ddpg.hpp"
#include "cec/baselines.hpp"
#include "cec/instances.hpp"
#include "cec/order_policy.hpp"
#include "cec/sim.hpp"

namespace cec {

// names: proposed, greedy, random, reject-all. `agent` is required for
// proposed; `order_net` is optional (smith_order when null).
std::unique_ptr<Policy> make_policy(const std::string& name, BaselineMode mode,
                                    std::uint64_t seed, DdpgAgent* agent,
                                    const OrderPolicyNet* order_net);

struct ExperimentSpec {
  SimConfig sim;
  std::vector<int> num_bs = {3, 5, 10};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<std::string> policies = {"proposed", "greedy", "random", "reject-all"};
  int episodes = 1;  // per seed
  std::map<int, std::filesystem::path> alloc_checkpoints;  // by N
  std::optional<std::filesystem::path> order_checkpoint;
  InstanceParams stage2_instances;
  int stage2_count = 0;  // 0 skips the stage-2 view
  std::uint64_t stage2_seed = 1;
  int window = 50;
  bool parallel = false;

  void validate() const;
  // Relative checkpoint paths are resolved against `base_dir`.
  static ExperimentSpec from_json(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir = {});
};

struct CellMetrics {
  int num_bs = 0;
  std::string policy;
  std::string view;
  std::vector<std::uint64_t> seeds;   // one per episode
  std::vector<double> welfare;        // one per episode
  std::vector<double> execution_cost;  // one per episode
  std::vector<double> moving_avg;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double seconds_per_200 = 0.0;
};

struct Stage2Metrics {
  std::string label;  // "learned-guarded" or "fixed-smith"
  double mean_cost = 0.0;
  std::size_t instances = 0;
};

struct MetricTable {
  std::vector<CellMetrics> cells;
  std::vector<Stage2Metrics> stage2;
  std::vector<std::string> failures;  // invariant violations

  const CellMetrics* find(int num_bs, const std::string& policy,
                          const std::string& view) const;
  void write(const std::filesystem::path& dir) const;
  nlohmann::json summary() const;
};

// Mean/min/max and the moving average from the raw welfare series.
void finalize_cell(CellMetrics& cell, int window);

MetricTable run_matrix(const ExperimentSpec& spec);

}  // namespace cec
