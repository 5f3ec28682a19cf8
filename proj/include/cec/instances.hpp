#pragma once

// Random single-BS stage-2 instances drawn from the simulator's parameter
// ranges, used by training, benchmarks and oracle sweeps.

#include <random>
#include <vector>

#include <json.hpp>

#include "cec/core.hpp"

namespace cec {

struct BsInstance {
  SlotGrid grid;
  ResourceOffer offer;
  std::vector<OffloadRequest> tasks;

  SystemState as_state() const;
};

struct InstanceParams {
  int min_tasks = 1;
  int max_tasks = 3;
  int horizon = 6;
  double delta_t = 1e-3;
  double raw_min_hz = 20e9;
  double raw_max_hz = 40e9;
  // Per-slot spare fraction of raw capacity.
  double spare_min = 0.05;
  double spare_max = 0.5;
  double zero_slot_prob = 0.1;  // slot fully busy
  double kappa = 20.0;          // price = kappa / available Hz
  double w_min = 5e6;
  double w_max = 20e6;
  double u0_min = 100.0;
  double u0_max = 500.0;
  double alpha_min = 10.0;
  double alpha_max = 90.0;
  // Order-sensitive family: the first `tight_slots` slots offer only a
  // small fraction of raw capacity.
  int tight_slots = 0;
  double tight_spare_max = 0.15;
  // Alternate heavy urgent tasks (large w, high alpha) with light lenient
  // ones instead of drawing every task from the full ranges.
  bool mixed_profiles = false;

  static InstanceParams from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// Parameters of the order-sensitive family: tight early capacity and a mix
// of heavy urgent tasks with light lenient ones.
InstanceParams order_sensitive_params();

// Reciprocal pricing used throughout: p = kappa / C, zero when C = 0.
double reciprocal_price(double kappa, double available_hz);

BsInstance random_bs_instance(std::mt19937_64& rng, const InstanceParams& params);

std::vector<BsInstance> random_bs_instances(std::uint64_t seed, std::size_t count,
                                            const InstanceParams& params);

}  // namespace cec
