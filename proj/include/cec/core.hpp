#pragma once

// Shared domain types and the surplus/feasibility arithmetic used by every
// scheduler in the project.
//
// Units: frequencies in Hz, workloads in CPU cycles, prices in money per Hz
// per slot, latency in whole slots, latency penalty in money per slot.

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cec {

// Target id meaning "request rejected".
inline constexpr int kReject = 0;

// Feasibility slack on per-slot capacity sums: absolute part in Hz plus a
// relative part that absorbs one rounding step at O(1e10) Hz magnitudes.
inline constexpr double kCapacityAbsTol = 1e-9;
inline constexpr double kCapacityRelTol = 1e-12;

// Relative slack when testing whether delivered work covers a workload.
inline constexpr double kWorkRelTol = 1e-12;

struct SlotGrid {
  double delta_t = 1e-3;  // seconds
  int horizon = 10;       // look-ahead slots (delta)
  long origin = 0;        // absolute index of the current slot

  void validate() const;
};

struct ResourceOffer {
  int bs_id = 0;
  long posted_at = 0;
  std::vector<double> capacity;  // entry k: C(t+k)
  std::vector<double> price;     // entry k: p(t+k)

  void validate(const SlotGrid& grid) const;
  double max_capacity() const;
  double max_price() const;
};

struct OffloadRequest {
  int task_id = 0;
  int origin_bs = 0;
  long posted_at = 0;
  double workload = 0.0;         // cycles
  double max_utility = 0.0;      // u0
  double latency_penalty = 0.0;  // alpha, money per slot

  void validate() const;
};

struct SchedulingScheme {
  int task_id = 0;
  int target = kReject;
  std::vector<double> exec;  // entry k: frequency granted in slot t+k

  bool rejected() const { return target == kReject; }
  void validate(const SlotGrid& grid) const;

  static SchedulingScheme reject(int task_id, const SlotGrid& grid);
};

struct SlotAction {
  std::vector<SchedulingScheme> schemes;
};

struct SystemState {
  SlotGrid grid;
  std::vector<ResourceOffer> offers;
  std::vector<OffloadRequest> requests;

  // nullptr when no offer exists for that BS.
  const ResourceOffer* offer_for(int bs_id) const;
  int num_bs() const { return static_cast<int>(offers.size()); }
  void validate() const;
};

double utility(const OffloadRequest& req, double latency);

// Smallest absolute slot at which cumulative f*dt reaches w, if any.
std::optional<long> ending_slot(std::span<const double> f, double w,
                                const SlotGrid& grid);

// Whole-slot latency l = t_e - t. Throws IncompleteExecution when absent.
long latency_slots(std::span<const double> f, double w, const SlotGrid& grid);

// Sum of p(t')*f(t'). No dt factor: prices are per Hz per slot.
double utilization_cost(std::span<const double> price,
                        std::span<const double> f);

// u(l) - sum p*f for a task executed on `offer`'s BS.
double surplus(const OffloadRequest& req, const ResourceOffer& offer,
               std::span<const double> f, const SlotGrid& grid);

// Reject-aware variant: a rejected scheme contributes exactly 0.
double scheme_surplus(const OffloadRequest& req, const SchedulingScheme& scheme,
                      const SystemState& state);

struct Overage {
  int bs_id = 0;
  int offset = 0;
  double overage = 0.0;  // Hz above the offered capacity
};

struct ValidationReport {
  std::vector<Overage> overages;
  std::vector<std::string> problems;  // structural issues (unknown BS, length)

  bool ok() const { return overages.empty() && problems.empty(); }
  std::string describe() const;
};

bool within_capacity(double used, double capacity);

ValidationReport validate_action(const SystemState& state,
                                 const SlotAction& action);

// Total surplus of the slot's requests. Schemes are matched to requests
// by task id.
double slot_reward(const SystemState& state, const SlotAction& action);

double discounted_return(std::span<const double> rewards, double gamma);

// Trailing mean over the last `window` entries (fewer at the start).
std::vector<double> moving_average(std::span<const double> xs, std::size_t window);

}  // namespace cec
