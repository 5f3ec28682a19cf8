#include "cec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cec/errors.hpp"

namespace cec {

std::unique_ptr<Policy> make_policy(const std::string& name, BaselineMode mode,
                                    std::uint64_t seed, DdpgAgent* agent,
                                    const OrderPolicyNet* order_net) {
  OrderProvider provider = order_net ? guarded_provider(*order_net) : smith_provider();
  if (name == "greedy") return std::make_unique<GreedyPolicy>(mode, smith_provider());
  // Random's own stream is derived from the environment seed.
  if (name == "random")
    return std::make_unique<RandomPolicy>(seed * 0x9E3779B97F4A7C15ULL + 17, mode,
                                          smith_provider());
  if (name == "reject-all") return std::make_unique<RejectAllPolicy>();
  if (name == "proposed") {
    if (!agent) throw MissingCheckpoint("proposed policy needs an allocation checkpoint");
    return std::make_unique<TwoStagePolicy>(*agent, mode == BaselineMode::AllocOnly
                                                        ? smith_provider()
                                                        : provider);
  }
  throw InvalidInput("unknown policy '" + name + "'");
}

void ExperimentSpec::validate() const {
  sim.validate();
  if (num_bs.empty() || seeds.empty() || policies.empty())
    throw InvalidInput("experiment needs sizes, seeds and policies");
  if (episodes < 1 || window < 1) throw InvalidInput("episodes and window must be positive");
  for (const auto& p : policies)
    if (p != "proposed" && p != "greedy" && p != "random" && p != "reject-all")
      throw InvalidInput("unknown policy '" + p + "'");
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir) {
  ExperimentSpec s;
  s.sim = SimConfig::from_json(doc.at("sim"));
  s.num_bs = doc.value("num_bs", s.num_bs);
  s.seeds = doc.value("seeds", s.seeds);
  s.policies = doc.value("policies", s.policies);
  s.episodes = doc.value("episodes", s.episodes);
  s.window = doc.value("window", s.window);
  s.parallel = doc.value("parallel", s.parallel);
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  if (doc.contains("checkpoints")) {
    const auto& c = doc["checkpoints"];
    if (c.contains("alloc"))
      for (const auto& [n, path] : c["alloc"].items())
        s.alloc_checkpoints[std::stoi(n)] = resolve(path.get<std::string>());
    if (c.contains("order")) s.order_checkpoint = resolve(c["order"].get<std::string>());
  }
  if (doc.contains("stage2")) {
    const auto& st = doc["stage2"];
    if (st.contains("instances")) s.stage2_instances = InstanceParams::from_json(st["instances"]);
    s.stage2_count = st.value("count", 200);
    s.stage2_seed = st.value("seed", s.stage2_seed);
  }
  s.validate();
  return s;
}

const CellMetrics* MetricTable::find(int num_bs, const std::string& policy,
                                     const std::string& view) const {
  for (const auto& c : cells)
    if (c.num_bs == num_bs && c.policy == policy && c.view == view) return &c;
  return nullptr;
}

void finalize_cell(CellMetrics& cell, int window) {
  if (cell.welfare.empty()) return;
  cell.mean = std::accumulate(cell.welfare.begin(), cell.welfare.end(), 0.0) /
              static_cast<double>(cell.welfare.size());
  cell.min = *std::min_element(cell.welfare.begin(), cell.welfare.end());
  cell.max = *std::max_element(cell.welfare.begin(), cell.welfare.end());
  cell.moving_avg = moving_average(cell.welfare, static_cast<std::size_t>(window));
}

namespace {

void check_cell(const CellMetrics& cell, int window, std::vector<std::string>& failures) {
  const std::string tag = cell.policy + "/" + cell.view + "/N=" + std::to_string(cell.num_bs);
  if (cell.policy == "reject-all")
    for (double w : cell.welfare)
      if (w != 0.0) failures.push_back(tag + ": reject-all welfare is " + std::to_string(w));
  // Recompute the moving average directly from the raw series.
  for (std::size_t i = 0; i < cell.welfare.size(); ++i) {
    const std::size_t first = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = first; j <= i; ++j) sum += cell.welfare[j];
    if (sum / static_cast<double>(i + 1 - first) != cell.moving_avg[i])
      failures.push_back(tag + ": moving average mismatch at " + std::to_string(i));
  }
}

}  // namespace

MetricTable run_matrix(const ExperimentSpec& spec) {
  spec.validate();
  MetricTable table;
  std::optional<OrderPolicyNet> order_net;
  if (spec.order_checkpoint) order_net = OrderPolicyNet::load(*spec.order_checkpoint);
  const bool wants_proposed =
      std::find(spec.policies.begin(), spec.policies.end(), "proposed") != spec.policies.end();

  std::vector<std::uint64_t> episode_seeds;
  for (std::uint64_t s : spec.seeds)
    for (int e = 0; e < spec.episodes; ++e)
      episode_seeds.push_back(s * 100003ULL + static_cast<std::uint64_t>(e));

  for (int n : spec.num_bs) {
    SimConfig sim = spec.sim;
    sim.num_bs = n;
    std::optional<DdpgAgent> agent;
    if (wants_proposed) {
      auto it = spec.alloc_checkpoints.find(n);
      if (it == spec.alloc_checkpoints.end())
        throw MissingCheckpoint("no allocation checkpoint for N=" + std::to_string(n));
      agent = DdpgAgent::load(it->second);
      if (agent->config().num_bs != n || agent->config().horizon != sim.horizon ||
          agent->config().group_size != sim.group_size)
        throw ShapeMismatch("allocation checkpoint for N=" + std::to_string(n) +
                            " does not match the simulator");
    }
    for (const auto& name : spec.policies) {
      for (const char* view : {"stage1", "global"}) {
        const BaselineMode mode =
            std::string(view) == "stage1" ? BaselineMode::AllocOnly : BaselineMode::Full;
        CellMetrics cell;
        cell.num_bs = n;
        cell.policy = name;
        cell.view = view;
        cell.seeds = episode_seeds;
        cell.welfare.assign(episode_seeds.size(), 0.0);
        cell.execution_cost.assign(episode_seeds.size(), 0.0);
        std::vector<double> secs(episode_seeds.size(), 0.0);
        std::vector<std::string> errors(episode_seeds.size());
        auto one = [&](std::size_t i) {
          SimConfig c = sim;
          c.seed = episode_seeds[i];
          try {
            auto policy = make_policy(name, mode, c.seed, agent ? &*agent : nullptr,
                                      order_net ? &*order_net : nullptr);
            const auto t0 = std::chrono::steady_clock::now();
            const EpisodeTrace trace = run_episode(c, *policy);
            secs[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
            cell.welfare[i] = trace.total_welfare;
            for (const auto& s : trace.steps) cell.execution_cost[i] += s.execution_cost;
          } catch (const CapacityViolation& e) {
            errors[i] = e.what();
          }
        };
        if (spec.parallel) {
#pragma omp parallel for schedule(dynamic)
          for (long i = 0; i < static_cast<long>(episode_seeds.size()); ++i)
            one(static_cast<std::size_t>(i));
        } else {
          for (std::size_t i = 0; i < episode_seeds.size(); ++i) one(i);
        }
        for (const auto& e : errors)
          if (!e.empty()) table.failures.push_back(e);
        const double mean_secs =
            std::accumulate(secs.begin(), secs.end(), 0.0) / static_cast<double>(secs.size());
        cell.seconds_per_200 = mean_secs * 200.0 / static_cast<double>(sim.episode_slots);
        finalize_cell(cell, spec.window);
        check_cell(cell, spec.window, table.failures);
        table.cells.push_back(std::move(cell));
      }
    }
  }

  if (spec.stage2_count > 0) {
    const auto instances = random_bs_instances(
        spec.stage2_seed, static_cast<std::size_t>(spec.stage2_count), spec.stage2_instances);
    auto mean_cost = [&](const OrderProvider& p) {
      double sum = 0.0;
      for (const auto& inst : instances)
        sum += solve_bs(inst.tasks, inst.offer, inst.grid, p).execution_cost();
      return sum / static_cast<double>(instances.size());
    };
    const double fixed = mean_cost(smith_provider());
    table.stage2.push_back({"fixed-smith", fixed, instances.size()});
    if (order_net) {
      const double learned = mean_cost(guarded_provider(*order_net));
      table.stage2.push_back({"learned-guarded", learned, instances.size()});
      if (learned > fixed + 1e-9 * std::max(1.0, std::abs(fixed)))
        table.failures.push_back("guarded learned order costs more than smith_order");
    }
  }
  return table;
}

void MetricTable::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "cells.csv");
    out.precision(12);
    out << "num_bs,policy,view,seed,welfare,moving_avg,execution_cost\n";
    for (const auto& c : cells)
      for (std::size_t i = 0; i < c.welfare.size(); ++i)
        out << c.num_bs << ',' << c.policy << ',' << c.view << ',' << c.seeds[i] << ','
            << c.welfare[i] << ',' << c.moving_avg[i] << ',' << c.execution_cost[i] << '\n';
  }
  {
    // Rows are policies, columns are N, entries are seconds per 200 slots.
    std::vector<int> ns;
    std::vector<std::string> policies;
    for (const auto& c : cells) {
      if (std::find(ns.begin(), ns.end(), c.num_bs) == ns.end()) ns.push_back(c.num_bs);
      if (std::find(policies.begin(), policies.end(), c.policy) == policies.end())
        policies.push_back(c.policy);
    }
    std::ofstream out(dir / "timing.csv");
    out.precision(6);
    out << "policy";
    for (int n : ns) out << ",N=" << n;
    out << '\n';
    for (const auto& p : policies) {
      out << p;
      for (int n : ns) {
        const CellMetrics* c = find(n, p, "global");
        out << ',';
        if (c) out << c->seconds_per_200;
      }
      out << '\n';
    }
  }
  std::ofstream out(dir / "summary.json");
  out << summary().dump(2) << '\n';
}

nlohmann::json MetricTable::summary() const {
  nlohmann::json j;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells)
    j["cells"].push_back({{"num_bs", c.num_bs},
                          {"policy", c.policy},
                          {"view", c.view},
                          {"episodes", c.welfare.size()},
                          {"mean_welfare", c.mean},
                          {"min_welfare", c.min},
                          {"max_welfare", c.max},
                          {"moving_avg", c.moving_avg},
                          {"seconds_per_200_slots", c.seconds_per_200}});
  j["stage2"] = nlohmann::json::array();
  for (const auto& s : stage2)
    j["stage2"].push_back(
        {{"order", s.label}, {"mean_execution_cost", s.mean_cost}, {"instances", s.instances}});
  j["failures"] = failures;
  j["ok"] = failures.empty();
  return j;
}

}  // namespace cec
