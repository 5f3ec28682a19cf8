#include "cec/sim.hpp"

#include <algorithm>
#include <fstream>

#include "cec/errors.hpp"
#include "cec/instances.hpp"

namespace cec {

double WorkloadProcess::advance(double level, double eps) const {
  return std::clamp(mean + persistence * (level - mean) + eps, min, max);
}

double WorkloadProcess::project(double level, int steps) const {
  double dev = level - mean;
  for (int i = 0; i < steps; ++i) dev *= persistence;
  return std::clamp(mean + dev, min, max);
}

void SimConfig::validate() const {
  if (num_bs < 1) throw InvalidInput("need at least one BS");
  if (horizon < 1 || !(delta_t > 0.0)) throw InvalidInput("bad slot grid");
  if (episode_slots < 1) throw InvalidInput("episode must have at least one slot");
  if (gamma < 0.0 || gamma > 1.0) throw InvalidInput("discount must lie in [0,1]");
  if (group_size < 1) throw InvalidInput("group size must be positive");
  if (raw_min_hz <= 0.0 || raw_max_hz < raw_min_hz) throw InvalidInput("raw capacity range");
  if (w_min <= 0.0 || w_max < w_min || w_floor <= 0.0) throw InvalidInput("workload range");
  if (u0_max < u0_min || alpha_min < 0.0 || alpha_max < alpha_min)
    throw InvalidInput("utility ranges");
  if (workload.min > workload.max) throw InvalidInput("workload clamp range");
  if (offer_threshold > request_threshold)
    throw InvalidInput("offer threshold must not exceed request threshold");
}

SimConfig SimConfig::from_json(const nlohmann::json& doc) {
  SimConfig c;
  c.num_bs = doc.value("num_bs", c.num_bs);
  c.horizon = doc.value("delta", c.horizon);
  c.delta_t = doc.value("delta_t", c.delta_t);
  c.episode_slots = doc.value("episode_slots", c.episode_slots);
  c.gamma = doc.value("gamma", c.gamma);
  c.group_size = doc.value("group_size", c.group_size);
  if (doc.contains("workload")) {
    const auto& w = doc["workload"];
    c.workload.mean = w.value("mean", c.workload.mean);
    c.workload.persistence = w.value("persistence", c.workload.persistence);
    c.workload.noise = w.value("noise", c.workload.noise);
    c.workload.min = w.value("min", c.workload.min);
    c.workload.max = w.value("max", c.workload.max);
  }
  c.kappa = doc.value("kappa", c.kappa);
  c.raw_min_hz = doc.value("raw_min_hz", c.raw_min_hz);
  c.raw_max_hz = doc.value("raw_max_hz", c.raw_max_hz);
  c.offer_threshold = doc.value("offer_threshold", c.offer_threshold);
  c.request_threshold = doc.value("request_threshold", c.request_threshold);
  c.w_min = doc.value("w_min", c.w_min);
  c.w_max = doc.value("w_max", c.w_max);
  c.w_floor = doc.value("w_floor", c.w_floor);
  c.u0_min = doc.value("u0_min", c.u0_min);
  c.u0_max = doc.value("u0_max", c.u0_max);
  c.alpha_min = doc.value("alpha_min", c.alpha_min);
  c.alpha_max = doc.value("alpha_max", c.alpha_max);
  if (!doc.contains("seed")) throw InvalidInput("simulator config requires a seed");
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

nlohmann::json SimConfig::to_json() const {
  return {{"num_bs", num_bs},
          {"delta", horizon},
          {"delta_t", delta_t},
          {"episode_slots", episode_slots},
          {"gamma", gamma},
          {"group_size", group_size},
          {"workload",
           {{"mean", workload.mean},
            {"persistence", workload.persistence},
            {"noise", workload.noise},
            {"min", workload.min},
            {"max", workload.max}}},
          {"kappa", kappa},
          {"raw_min_hz", raw_min_hz},
          {"raw_max_hz", raw_max_hz},
          {"offer_threshold", offer_threshold},
          {"request_threshold", request_threshold},
          {"w_min", w_min},
          {"w_max", w_max},
          {"w_floor", w_floor},
          {"u0_min", u0_min},
          {"u0_max", u0_max},
          {"alpha_min", alpha_min},
          {"alpha_max", alpha_max},
          {"seed", seed}};
}

double BsProfile::committed_at(long slot) const {
  auto it = committed.find(slot);
  return it == committed.end() ? 0.0 : it->second;
}

std::vector<ResourceOffer> gen_offers(const std::vector<BsProfile>& profiles, long slot,
                                      const SimConfig& config) {
  std::vector<ResourceOffer> offers;
  offers.reserve(profiles.size());
  for (const auto& bs : profiles) {
    ResourceOffer o;
    o.bs_id = bs.bs_id;
    o.posted_at = slot;
    o.capacity.assign(config.horizon, 0.0);
    o.price.assign(config.horizon, 0.0);
    if (bs.workload < config.offer_threshold) {
      for (int k = 0; k < config.horizon; ++k) {
        const double level = config.workload.project(bs.workload, k);
        const double spare = bs.raw_capacity * (1.0 - level);
        const double avail = std::max(0.0, spare - bs.committed_at(slot + k));
        o.capacity[k] = avail;
        o.price[k] = reciprocal_price(bs.kappa, avail);
      }
    }
    offers.push_back(std::move(o));
  }
  return offers;
}

std::vector<OffloadRequest> gen_requests(std::vector<BsProfile>& profiles, long slot,
                                         std::mt19937_64& rng, const SimConfig& config,
                                         int& next_task_id) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::vector<OffloadRequest> out;
  for (auto& bs : profiles) {
    if (!(bs.workload > config.request_threshold)) continue;
    double remaining =
        (bs.workload - config.request_threshold) * bs.raw_capacity * config.delta_t;
    while (remaining > 0.0) {
      OffloadRequest r;
      r.task_id = next_task_id++;
      r.origin_bs = bs.bs_id;
      r.posted_at = slot;
      double w = uniform(config.w_min, config.w_max);
      if (w >= remaining) {
        w = std::max(remaining, config.w_floor);
        remaining = 0.0;
      } else {
        remaining -= w;
      }
      r.workload = w;
      r.max_utility = uniform(config.u0_min, config.u0_max);
      r.latency_penalty = uniform(config.alpha_min, config.alpha_max);
      out.push_back(r);
    }
    bs.workload = config.request_threshold;
  }
  return out;
}

double action_execution_cost(const SystemState& state, const SlotAction& action) {
  double cost = 0.0;
  for (const auto& s : action.schemes) {
    if (s.rejected()) continue;
    const ResourceOffer* offer = state.offer_for(s.target);
    auto req = std::find_if(state.requests.begin(), state.requests.end(),
                            [&](const OffloadRequest& r) { return r.task_id == s.task_id; });
    if (!offer || req == state.requests.end()) continue;
    const long l = latency_slots(s.exec, req->workload, state.grid);
    cost += req->latency_penalty * static_cast<double>(l) +
            utilization_cost(offer->price, s.exec);
  }
  return cost;
}

Simulator::Simulator(SimConfig config) : config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < config_.num_bs; ++i) {
    BsProfile bs;
    bs.bs_id = i + 1;
    bs.kappa = config_.kappa;
    bs.raw_capacity =
        config_.raw_min_hz + (config_.raw_max_hz - config_.raw_min_hz) * unit(rng_);
    bs.workload = config_.workload.min +
                  (config_.workload.max - config_.workload.min) * unit(rng_);
    profiles_.push_back(std::move(bs));
  }
}

StepRecord Simulator::step(Policy& policy, StepAudit* audit) {
  SystemState state;
  state.grid = grid();
  state.offers = gen_offers(profiles_, slot_, config_);
  std::vector<double> excess(profiles_.size(), 0.0);
  for (std::size_t i = 0; i < profiles_.size(); ++i)
    if (profiles_[i].workload > config_.request_threshold)
      excess[i] = (profiles_[i].workload - config_.request_threshold) *
                  profiles_[i].raw_capacity * config_.delta_t;
  state.requests = gen_requests(profiles_, slot_, rng_, config_, next_task_id_);

  SlotAction action = policy.decide(state);
  if (action.schemes.size() != state.requests.size())
    throw InvalidInput(policy.name() + " returned " +
                       std::to_string(action.schemes.size()) + " schemes for " +
                       std::to_string(state.requests.size()) + " requests");
  const ValidationReport report = validate_action(state, action);
  if (!report.ok())
    throw CapacityViolation(policy.name() + ": " + report.describe());

  StepRecord rec;
  rec.slot = slot_;
  rec.n_requests = static_cast<int>(state.requests.size());
  rec.reward = slot_reward(state, action);
  rec.execution_cost = action_execution_cost(state, action);
  for (const auto& s : action.schemes) {
    if (s.rejected()) continue;
    ++rec.n_accepted;
    auto& bs = profiles_[s.target - 1];
    for (int k = 0; k < config_.horizon; ++k)
      if (s.exec[k] > 0.0) bs.committed[slot_ + k] += s.exec[k];
  }
  cumulative_ += rec.reward;
  rec.cumulative_welfare = cumulative_;

  if (audit) {
    audit->offers_after_commit = gen_offers(profiles_, slot_, config_);
    audit->excess_cycles = excess;
    audit->requested_cycles.assign(profiles_.size(), 0.0);
    for (const auto& r : state.requests)
      audit->requested_cycles[r.origin_bs - 1] += r.workload;
    audit->state = state;
    audit->action = action;
  }

  std::uniform_real_distribution<double> noise(-config_.workload.noise,
                                               config_.workload.noise);
  for (auto& bs : profiles_) {
    bs.workload = config_.workload.advance(bs.workload, noise(rng_));
    bs.committed.erase(bs.committed.begin(), bs.committed.lower_bound(slot_ + 1));
  }
  ++slot_;
  return rec;
}

EpisodeTrace Simulator::run_episode(Policy& policy) {
  EpisodeTrace trace;
  trace.policy = policy.name();
  trace.seed = config_.seed;
  std::vector<double> rewards;
  for (int i = 0; i < config_.episode_slots; ++i) {
    trace.steps.push_back(step(policy));
    rewards.push_back(trace.steps.back().reward);
  }
  policy.on_episode_end();
  trace.total_welfare = cumulative_;
  trace.discounted_welfare = discounted_return(rewards, config_.gamma);
  return trace;
}

EpisodeTrace run_episode(const SimConfig& config, Policy& policy) {
  Simulator sim(config);
  return sim.run_episode(policy);
}

void EpisodeTrace::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.precision(12);
  out << "slot,n_requests,n_accepted,reward,cumulative_welfare\n";
  for (const auto& s : steps)
    out << s.slot << ',' << s.n_requests << ',' << s.n_accepted << ',' << s.reward << ','
        << s.cumulative_welfare << '\n';
}

nlohmann::json EpisodeTrace::summary() const {
  int requests = 0, accepted = 0;
  double exec_cost = 0.0;
  for (const auto& s : steps) {
    requests += s.n_requests;
    accepted += s.n_accepted;
    exec_cost += s.execution_cost;
  }
  return {{"policy", policy},
          {"seed", seed},
          {"slots", steps.size()},
          {"requests", requests},
          {"accepted", accepted},
          {"total_welfare", total_welfare},
          {"discounted_welfare", discounted_welfare},
          {"execution_cost", exec_cost}};
}

SlotAction RejectAllPolicy::decide(const SystemState& state) {
  SlotAction a;
  for (const auto& r : state.requests)
    a.schemes.push_back(SchedulingScheme::reject(r.task_id, state.grid));
  return a;
}

}  // namespace cec
