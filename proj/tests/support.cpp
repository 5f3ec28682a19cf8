#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cec::testing {

ResourceOffer make_offer(int bs_id, std::vector<double> capacity, std::vector<double> price,
                         long posted_at) {
  return {bs_id, posted_at, std::move(capacity), std::move(price)};
}

OffloadRequest make_task(int id, double w, double u0, double alpha, int origin) {
  return {id, origin, 0, w, u0, alpha};
}

FractionalSample sample_fractional_surplus(const BsInstance& inst, std::mt19937_64& rng,
                                           std::vector<std::vector<double>>* freqs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int h = inst.grid.horizon;
  const int n = static_cast<int>(inst.tasks.size());
  std::vector<double> resid = inst.offer.capacity;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  if (freqs) freqs->assign(n, std::vector<double>(h, 0.0));
  FractionalSample out;
  for (int i : order) {
    const auto& t = inst.tasks[i];
    int start = std::uniform_int_distribution<int>(0, h - 1)(rng);
    if (u(rng) < 0.5) start = 0;
    const double share = u(rng) < 0.25 ? 1.0 : u(rng);
    double rest = t.workload;
    std::vector<double> f(h, 0.0);
    const std::vector<double> keep = resid;
    for (int k = start; k < h && rest > 0.0; ++k) {
      double take = (u(rng) < 0.3 ? 1.0 : share) * resid[k];
      if (take * inst.grid.delta_t >= rest) {
        take = rest / inst.grid.delta_t;
        rest = 0.0;
      } else {
        rest -= take * inst.grid.delta_t;
      }
      f[k] = take;
      resid[k] -= take;
    }
    if (rest > 0.0) {
      resid = keep;  // unfinished: reject it and hand the capacity back
      continue;
    }
    out.surplus += surplus(t, inst.offer, f, inst.grid);
    ++out.completed;
    if (freqs) (*freqs)[i] = f;
  }
  return out;
}

BsInstance refine(const BsInstance& inst) {
  BsInstance r = inst;
  r.grid.delta_t = inst.grid.delta_t / 2.0;
  r.grid.horizon = inst.grid.horizon * 2;
  r.offer.capacity.clear();
  r.offer.price.clear();
  for (int k = 0; k < inst.grid.horizon; ++k)
    for (int half = 0; half < 2; ++half) {
      r.offer.capacity.push_back(inst.offer.capacity[k]);
      r.offer.price.push_back(inst.offer.price[k] / 2.0);
    }
  for (auto& t : r.tasks) t.latency_penalty /= 2.0;
  return r;
}

std::optional<double> enumerate_fill_cost(const ResourceOffer& offer, int first, int last,
                                          double workload, const SlotGrid& grid) {
  const int width = last - first + 1;
  std::optional<double> best;
  for (unsigned mask = 0; mask < (1u << width); ++mask) {
    if (!(mask >> (width - 1) & 1u)) continue;  // `last` must be used
    for (int trim = 0; trim < width; ++trim) {
      if (!(mask >> trim & 1u)) continue;
      double full = 0.0, cost = 0.0;
      for (int j = 0; j < width; ++j)
        if ((mask >> j & 1u) && j != trim) {
          full += offer.capacity[first + j] * grid.delta_t;
          cost += offer.price[first + j] * offer.capacity[first + j];
        }
      const double rest = workload - full;
      const int k = first + trim;
      const double tol = kWorkRelTol * workload;
      if (rest <= tol || rest > offer.capacity[k] * grid.delta_t + tol) continue;
      cost += offer.price[k] * std::min(offer.capacity[k], rest / grid.delta_t);
      if (!best || cost < *best) best = cost;
    }
  }
  return best;
}

double best_single_task_surplus(const OffloadRequest& task, const ResourceOffer& offer,
                                const SlotGrid& grid) {
  double best = 0.0;  // dropping the task is always allowed
  bool any = false;
  for (int last = 0; last < grid.horizon; ++last) {
    const auto c = enumerate_fill_cost(offer, 0, last, task.workload, grid);
    if (!c) continue;
    const double s = utility(task, static_cast<double>(last)) - *c;
    if (!any || s > best) best = s;
    any = true;
  }
  return best;
}

double max_fd_error(std::span<double> params, std::span<const double> grad,
                    const std::function<double()>& f, double h, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f();
    params[i] = keep - h;
    const double down = f();
    params[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double err =
        std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), floor});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace cec::testing
