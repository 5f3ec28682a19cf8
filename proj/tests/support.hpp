#pragma once

// Independent oracles and transforms shared by the test binaries.

#include <functional>
#include <optional>
#include <span>
#include <random>
#include <vector>

#include "cec/core.hpp"
#include "cec/instances.hpp"

namespace cec::testing {

ResourceOffer make_offer(int bs_id, std::vector<double> capacity, std::vector<double> price,
                         long posted_at = 0);
OffloadRequest make_task(int id, double w, double u0, double alpha, int origin = 0);

struct FractionalSample {
  double surplus = 0.0;
  int completed = 0;
};

// A random feasible fractional decision on `inst`: tasks run in a random
// order, each taking random fractions of what is left of every slot from a
// random start, so two tasks may share a slot. A task whose draw does not
// finish inside the horizon is rejected and its capacity handed back.
FractionalSample sample_fractional_surplus(const BsInstance& inst, std::mt19937_64& rng,
                                           std::vector<std::vector<double>>* freqs = nullptr);

// One refinement step: every slot becomes two half slots with the same
// frequency cap, half the price per Hz and half the latency penalty per slot.
BsInstance refine(const BsInstance& inst);

// Cheapest cost of finishing `workload` in offsets [first, last] with last
// used, by enumerating every slot subset and every choice of trimmed slot.
std::optional<double> enumerate_fill_cost(const ResourceOffer& offer, int first, int last,
                                          double workload, const SlotGrid& grid);

// Best surplus of a single task on a single BS over every plan that uses
// any subset of slots at full capacity except one trimmed slot.
double best_single_task_surplus(const OffloadRequest& task, const ResourceOffer& offer,
                                const SlotGrid& grid);

// Largest relative error between `grad` and central differences of `f` in
// every entry of `params`: |fd - g| / max(|fd|, |g|, floor). The floor
// keeps near-zero entries from reporting pure cancellation noise.
double max_fd_error(std::span<double> params, std::span<const double> grad,
                    const std::function<double()>& f, double h = 1e-5, double floor = 1e-6);

}  // namespace cec::testing
