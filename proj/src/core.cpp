#include "cec/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "cec/errors.hpp"

namespace cec {

namespace {

bool all_finite_nonneg(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x) && x >= 0.0; });
}

}  // namespace

void SlotGrid::validate() const {
  if (!(delta_t > 0.0) || !std::isfinite(delta_t))
    throw InvalidInput("slot duration must be positive");
  if (horizon < 1) throw InvalidInput("horizon must be at least one slot");
}

void ResourceOffer::validate(const SlotGrid& grid) const {
  if (bs_id < 1) throw InvalidInput("BS ids start at 1");
  if (static_cast<int>(capacity.size()) != grid.horizon ||
      static_cast<int>(price.size()) != grid.horizon)
    throw InvalidInput("offer vectors must have exactly horizon entries");
  if (!all_finite_nonneg(capacity) || !all_finite_nonneg(price))
    throw InvalidInput("offer entries must be finite and nonnegative");
}

double ResourceOffer::max_capacity() const {
  return capacity.empty() ? 0.0
                          : *std::max_element(capacity.begin(), capacity.end());
}

double ResourceOffer::max_price() const {
  return price.empty() ? 0.0 : *std::max_element(price.begin(), price.end());
}

void OffloadRequest::validate() const {
  if (!(workload > 0.0) || !std::isfinite(workload))
    throw InvalidInput("workload must be positive");
  if (!(latency_penalty >= 0.0) || !std::isfinite(latency_penalty))
    throw InvalidInput("latency penalty must be nonnegative");
  if (!std::isfinite(max_utility)) throw InvalidInput("utility must be finite");
}

void SchedulingScheme::validate(const SlotGrid& grid) const {
  if (static_cast<int>(exec.size()) != grid.horizon)
    throw InvalidInput("execution vector must have exactly horizon entries");
  if (!all_finite_nonneg(exec))
    throw InvalidInput("execution entries must be finite and nonnegative");
  if (rejected() &&
      std::any_of(exec.begin(), exec.end(), [](double f) { return f != 0.0; }))
    throw InvalidInput("a rejected scheme cannot carry frequency");
}

SchedulingScheme SchedulingScheme::reject(int task_id, const SlotGrid& grid) {
  return {task_id, kReject, std::vector<double>(grid.horizon, 0.0)};
}

const ResourceOffer* SystemState::offer_for(int bs_id) const {
  for (const auto& o : offers)
    if (o.bs_id == bs_id) return &o;
  return nullptr;
}

void SystemState::validate() const {
  grid.validate();
  for (const auto& o : offers) {
    o.validate(grid);
    if (o.posted_at != grid.origin)
      throw InvalidInput("offer posted at a different slot");
  }
  for (const auto& r : requests) {
    r.validate();
    if (r.posted_at != grid.origin)
      throw InvalidInput("request posted at a different slot");
  }
}

double utility(const OffloadRequest& req, double latency) {
  return req.max_utility - req.latency_penalty * latency;
}

std::optional<long> ending_slot(std::span<const double> f, double w,
                                const SlotGrid& grid) {
  const double target = w * (1.0 - kWorkRelTol);
  double done = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    done += f[k] * grid.delta_t;
    if (done >= target) return grid.origin + static_cast<long>(k);
  }
  return std::nullopt;
}

long latency_slots(std::span<const double> f, double w, const SlotGrid& grid) {
  auto end = ending_slot(f, w, grid);
  if (!end) throw IncompleteExecution("execution vector never completes the task");
  return *end - grid.origin;
}

double utilization_cost(std::span<const double> price,
                        std::span<const double> f) {
  if (price.size() != f.size())
    throw InvalidInput("price and execution vectors differ in length");
  double cost = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) cost += price[k] * f[k];
  return cost;
}

double surplus(const OffloadRequest& req, const ResourceOffer& offer,
               std::span<const double> f, const SlotGrid& grid) {
  const long l = latency_slots(f, req.workload, grid);
  return utility(req, static_cast<double>(l)) - utilization_cost(offer.price, f);
}

double scheme_surplus(const OffloadRequest& req, const SchedulingScheme& scheme,
                      const SystemState& state) {
  if (scheme.rejected()) return 0.0;
  const ResourceOffer* offer = state.offer_for(scheme.target);
  if (!offer) throw InvalidInput("scheme targets a BS without an offer");
  return surplus(req, *offer, scheme.exec, state.grid);
}

bool within_capacity(double used, double capacity) {
  return used <= capacity + kCapacityAbsTol + kCapacityRelTol * capacity;
}

std::string ValidationReport::describe() const {
  std::ostringstream os;
  for (const auto& p : problems) os << p << "; ";
  for (const auto& o : overages)
    os << "BS " << o.bs_id << " offset " << o.offset << " over by " << o.overage
       << " Hz; ";
  return os.str();
}

ValidationReport validate_action(const SystemState& state,
                                 const SlotAction& action) {
  ValidationReport report;
  const int h = state.grid.horizon;
  // Schemes are visited by task id and usage kept in an ordered map, so the
  // report (down to rounding of the sums) is independent of scheme order.
  std::vector<const SchedulingScheme*> sorted;
  for (const auto& s : action.schemes) sorted.push_back(&s);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return std::tie(a->task_id, a->target) < std::tie(b->task_id, b->target);
  });
  std::map<int, std::vector<double>> usage;
  for (const SchedulingScheme* sp : sorted) {
    const SchedulingScheme& s = *sp;
    if (static_cast<int>(s.exec.size()) != h) {
      report.problems.push_back("task " + std::to_string(s.task_id) +
                                ": execution vector has wrong length");
      continue;
    }
    if (s.rejected()) {
      if (std::any_of(s.exec.begin(), s.exec.end(),
                      [](double f) { return f != 0.0; }))
        report.problems.push_back("task " + std::to_string(s.task_id) +
                                  ": rejected but carries frequency");
      continue;
    }
    if (!state.offer_for(s.target)) {
      report.problems.push_back("task " + std::to_string(s.task_id) +
                                ": unknown target BS " +
                                std::to_string(s.target));
      continue;
    }
    auto& u = usage[s.target];
    u.resize(h, 0.0);
    for (int k = 0; k < h; ++k) u[k] += s.exec[k];
  }
  for (const auto& [bs, u] : usage) {
    const ResourceOffer& offer = *state.offer_for(bs);
    for (int k = 0; k < h; ++k) {
      if (!within_capacity(u[k], offer.capacity[k]))
        report.overages.push_back({bs, k, u[k] - offer.capacity[k]});
    }
  }
  return report;
}

double slot_reward(const SystemState& state, const SlotAction& action) {
  std::unordered_map<int, const OffloadRequest*> by_id;
  for (const auto& r : state.requests) by_id[r.task_id] = &r;
  double total = 0.0;
  for (const auto& s : action.schemes) {
    auto it = by_id.find(s.task_id);
    if (it == by_id.end())
      throw InvalidInput("scheme for unknown task " + std::to_string(s.task_id));
    total += scheme_surplus(*it->second, s, state);
  }
  return total;
}

double discounted_return(std::span<const double> rewards, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw InvalidInput("discount must lie in [0,1]");
  double g = 0.0;
  double w = 1.0;
  for (double r : rewards) {
    g += w * r;
    w *= gamma;
  }
  return g;
}

std::vector<double> moving_average(std::span<const double> xs, std::size_t window) {
  if (window == 0) throw InvalidInput("moving-average window must be positive");
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = first; j <= i; ++j) sum += xs[j];
    out[i] = sum / static_cast<double>(i + 1 - first);
  }
  return out;
}

}  // namespace cec
