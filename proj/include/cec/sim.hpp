#pragma once

// Slot-based CEC environment: N base stations with a stochastic own
// workload. Idle BSs (below the offer threshold) post offers priced at the
// reciprocal of their available capacity; overloaded BSs (above the request
// threshold) post offloading requests for their excess cycles. Accepted
// plans become binding commitments on the host BS's future slots.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cec/core.hpp"

namespace cec {

struct WorkloadProcess {
  double mean = 0.85;
  double persistence = 0.9;  // AR(1) coefficient
  double noise = 0.05;       // eps ~ U[-noise, noise]
  double min = 0.5;
  double max = 1.2;

  double advance(double level, double eps) const;
  // Mean-reversion expectation `steps` slots ahead.
  double project(double level, int steps) const;
};

struct SimConfig {
  int num_bs = 10;
  int horizon = 10;
  double delta_t = 1e-3;
  int episode_slots = 200;
  double gamma = 0.95;
  int group_size = 5;
  WorkloadProcess workload;
  double kappa = 20.0;
  double raw_min_hz = 20e9;
  double raw_max_hz = 40e9;
  double offer_threshold = 0.8;
  double request_threshold = 1.0;
  double w_min = 5e6;
  double w_max = 20e6;
  double w_floor = 1e6;
  double u0_min = 100.0;
  double u0_max = 500.0;
  double alpha_min = 10.0;
  double alpha_max = 90.0;
  std::uint64_t seed = 1;

  void validate() const;
  static SimConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct BsProfile {
  int bs_id = 0;
  double raw_capacity = 0.0;  // Hz
  double workload = 0.0;      // fraction of raw capacity
  double kappa = 20.0;
  std::map<long, double> committed;  // absolute slot -> Hz promised

  double committed_at(long slot) const;
};

std::vector<ResourceOffer> gen_offers(const std::vector<BsProfile>& profiles, long slot,
                                      const SimConfig& config);

// Emits requests for every BS above the request threshold and resets its
// workload to the threshold. `next_task_id` is advanced per request.
std::vector<OffloadRequest> gen_requests(std::vector<BsProfile>& profiles, long slot,
                                         std::mt19937_64& rng, const SimConfig& config,
                                         int& next_task_id);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual SlotAction decide(const SystemState& state) = 0;
  virtual void on_episode_end() {}
};

struct StepRecord {
  long slot = 0;
  int n_requests = 0;
  int n_accepted = 0;
  double reward = 0.0;
  double cumulative_welfare = 0.0;
  // Latency plus utilization cost of the accepted tasks.
  double execution_cost = 0.0;
};

// Snapshot of one step for conservation checks.
struct StepAudit {
  SystemState state;
  SlotAction action;
  std::vector<ResourceOffer> offers_after_commit;  // same slot, regenerated
  std::vector<double> requested_cycles;            // per BS, before emission
  std::vector<double> excess_cycles;               // per BS, before emission
};

struct EpisodeTrace {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  double total_welfare = 0.0;
  double discounted_welfare = 0.0;

  void write_csv(const std::filesystem::path& path) const;
  nlohmann::json summary() const;
};

class Simulator {
 public:
  explicit Simulator(SimConfig config);

  const SimConfig& config() const { return config_; }
  long slot() const { return slot_; }
  const std::vector<BsProfile>& profiles() const { return profiles_; }
  SlotGrid grid() const { return {config_.delta_t, config_.horizon, slot_}; }

  // Builds S(t), queries the policy, validates and commits its action,
  // then advances every BS's workload. Throws CapacityViolation when the
  // policy oversubscribes a BS.
  StepRecord step(Policy& policy, StepAudit* audit = nullptr);

  EpisodeTrace run_episode(Policy& policy);

 private:
  SimConfig config_;
  std::mt19937_64 rng_;
  std::vector<BsProfile> profiles_;
  long slot_ = 0;
  int next_task_id_ = 1;
  double cumulative_ = 0.0;
};

EpisodeTrace run_episode(const SimConfig& config, Policy& policy);

// Accepted schemes' latency + utilization cost.
double action_execution_cost(const SystemState& state, const SlotAction& action);

// Rejects every request.
class RejectAllPolicy : public Policy {
 public:
  std::string name() const override { return "reject-all"; }
  SlotAction decide(const SystemState& state) override;
};

}  // namespace cec
