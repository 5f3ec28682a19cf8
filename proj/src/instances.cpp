#include "cec/instances.hpp"

#include <algorithm>

#include "cec/errors.hpp"

namespace cec {

SystemState BsInstance::as_state() const {
  SystemState s;
  s.grid = grid;
  s.offers = {offer};
  s.requests = tasks;
  return s;
}

InstanceParams InstanceParams::from_json(const nlohmann::json& doc) {
  InstanceParams p;
  p.min_tasks = doc.value("min_tasks", p.min_tasks);
  p.max_tasks = doc.value("max_tasks", p.max_tasks);
  p.horizon = doc.value("delta", p.horizon);
  p.delta_t = doc.value("delta_t", p.delta_t);
  p.raw_min_hz = doc.value("raw_min_hz", p.raw_min_hz);
  p.raw_max_hz = doc.value("raw_max_hz", p.raw_max_hz);
  p.spare_min = doc.value("spare_min", p.spare_min);
  p.spare_max = doc.value("spare_max", p.spare_max);
  p.zero_slot_prob = doc.value("zero_slot_prob", p.zero_slot_prob);
  p.kappa = doc.value("kappa", p.kappa);
  p.w_min = doc.value("w_min", p.w_min);
  p.w_max = doc.value("w_max", p.w_max);
  p.u0_min = doc.value("u0_min", p.u0_min);
  p.u0_max = doc.value("u0_max", p.u0_max);
  p.alpha_min = doc.value("alpha_min", p.alpha_min);
  p.alpha_max = doc.value("alpha_max", p.alpha_max);
  p.tight_slots = doc.value("tight_slots", p.tight_slots);
  p.tight_spare_max = doc.value("tight_spare_max", p.tight_spare_max);
  p.mixed_profiles = doc.value("mixed_profiles", p.mixed_profiles);
  if (p.min_tasks < 1 || p.max_tasks < p.min_tasks || p.horizon < 1 ||
      p.w_min <= 0.0 || p.w_max < p.w_min || p.spare_max < p.spare_min)
    throw InvalidInput("inconsistent instance parameter ranges");
  return p;
}

nlohmann::json InstanceParams::to_json() const {
  return {{"min_tasks", min_tasks},     {"max_tasks", max_tasks},
          {"delta", horizon},           {"delta_t", delta_t},
          {"raw_min_hz", raw_min_hz},   {"raw_max_hz", raw_max_hz},
          {"spare_min", spare_min},     {"spare_max", spare_max},
          {"zero_slot_prob", zero_slot_prob}, {"kappa", kappa},
          {"w_min", w_min},             {"w_max", w_max},
          {"u0_min", u0_min},           {"u0_max", u0_max},
          {"alpha_min", alpha_min},     {"alpha_max", alpha_max},
          {"tight_slots", tight_slots}, {"tight_spare_max", tight_spare_max},
          {"mixed_profiles", mixed_profiles}};
}

InstanceParams order_sensitive_params() {
  InstanceParams p;
  p.min_tasks = 2;
  p.max_tasks = 2;
  p.horizon = 6;
  p.tight_slots = 1;
  p.tight_spare_max = 0.2;
  p.zero_slot_prob = 0.0;
  p.spare_min = 0.25;
  p.spare_max = 0.5;
  p.mixed_profiles = true;
  return p;
}

double reciprocal_price(double kappa, double available_hz) {
  return available_hz > 0.0 ? kappa / available_hz : 0.0;
}

BsInstance random_bs_instance(std::mt19937_64& rng, const InstanceParams& p) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  BsInstance inst;
  inst.grid = {p.delta_t, p.horizon, 0};
  inst.offer.bs_id = 1;
  inst.offer.posted_at = 0;
  const double raw = uniform(p.raw_min_hz, p.raw_max_hz);
  for (int k = 0; k < p.horizon; ++k) {
    double spare;
    if (k < p.tight_slots)
      spare = uniform(0.02, p.tight_spare_max);
    else if (unit(rng) < p.zero_slot_prob)
      spare = 0.0;
    else
      spare = uniform(p.spare_min, p.spare_max);
    const double cap = raw * spare;
    inst.offer.capacity.push_back(cap);
    inst.offer.price.push_back(reciprocal_price(p.kappa, cap));
  }
  std::uniform_int_distribution<int> count(p.min_tasks, p.max_tasks);
  const int n = count(rng);
  const double w_mid = 0.5 * (p.w_min + p.w_max);
  const double alpha_mid = 0.5 * (p.alpha_min + p.alpha_max);
  for (int i = 0; i < n; ++i) {
    OffloadRequest r;
    r.task_id = i + 1;
    r.origin_bs = 2;
    r.posted_at = 0;
    if (p.mixed_profiles && i % 2 == 0) {
      r.workload = uniform(w_mid, p.w_max);
      r.latency_penalty = uniform(alpha_mid, p.alpha_max);
    } else if (p.mixed_profiles) {
      r.workload = uniform(p.w_min, w_mid);
      r.latency_penalty = uniform(p.alpha_min, alpha_mid);
    } else {
      r.workload = uniform(p.w_min, p.w_max);
      r.latency_penalty = uniform(p.alpha_min, p.alpha_max);
    }
    r.max_utility = uniform(p.u0_min, p.u0_max);
    inst.tasks.push_back(r);
  }
  if (p.mixed_profiles) {
    std::shuffle(inst.tasks.begin(), inst.tasks.end(), rng);
    for (int i = 0; i < n; ++i) inst.tasks[i].task_id = i + 1;
  }
  return inst;
}

std::vector<BsInstance> random_bs_instances(std::uint64_t seed, std::size_t count,
                                            const InstanceParams& params) {
  std::mt19937_64 rng(seed);
  std::vector<BsInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_bs_instance(rng, params));
  return out;
}

}  // namespace cec
