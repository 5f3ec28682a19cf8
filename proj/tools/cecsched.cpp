// cecsched: command-line front end for the CEC scheduler.
//
//   cecsched oracle check <instance.json> [--bs ID]
//   cecsched train alloc --config cfg.json --out dir/
//   cecsched train order --config cfg.json --out dir/
//   cecsched sim run --config sim.json --policy NAME --out dir/
//   cecsched bench run --spec spec.json --out dir/

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cec/alloc_ddpg.hpp"
#include "cec/errors.hpp"
#include "cec/exec_solver.hpp"
#include "cec/experiment.hpp"
#include "cec/instance_io.hpp"
#include "cec/order_policy.hpp"
#include "cec/sim.hpp"

namespace fs = std::filesystem;
using namespace cec;

namespace {

int oracle_check(const fs::path& path, std::optional<int> bs, const std::string& family) {
  const SystemState state = load_instance(path);
  const ResourceOffer* offer = nullptr;
  if (bs) {
    offer = state.offer_for(*bs);
  } else if (state.offers.size() == 1) {
    offer = &state.offers.front();
  } else {
    throw InvalidInput("instance has several offers, pick one with --bs");
  }
  if (!offer) throw InvalidInput("no offer for the requested BS");
  const PlanFamily fam = family == "binary" ? PlanFamily::Binary : PlanFamily::Trimmed;
  const ExecutionPlan best = brute_force_best(state.requests, *offer, state.grid, {}, fam);
  const ExecutionPlan dp = dp_solve(state.requests, best.order, *offer, state.grid);
  const ExecutionPlan smith =
      dp_solve(state.requests, smith_order(state.requests), *offer, state.grid);
  std::printf("oracle surplus      %.9f (%d of %zu tasks)\n", best.total_surplus,
              best.completed(), state.requests.size());
  std::printf("dp @ oracle order   %.9f\n", dp.total_surplus);
  std::printf("dp @ smith order    %.9f\n", smith.total_surplus);
  std::printf("gap bound           %.9f\n", gap_bound(state.requests, *offer));
  if (fam == PlanFamily::Trimmed && std::abs(dp.total_surplus - best.total_surplus) > 1e-9) {
    std::printf("MISMATCH\n");
    return 1;
  }
  std::printf("ok\n");
  return 0;
}

int train_alloc_cmd(const fs::path& config, const fs::path& out) {
  const AllocTrainConfig cfg = AllocTrainConfig::from_json(read_json_file(config));
  DdpgAgent agent(cfg.agent);
  const AllocTrainResult res = train_alloc(agent, cfg);
  agent.save(out / "alloc.json");
  write_alloc_curve(out / "alloc_curve.csv", res.curve);
  std::printf("trained %d episodes, %zu updates, final moving average %.3f\n", cfg.episodes,
              res.updates, res.curve.back().moving_avg);
  return 0;
}

int train_order_cmd(const fs::path& config, const fs::path& out) {
  const OrderTrainConfig cfg = OrderTrainConfig::from_json(read_json_file(config));
  OrderPolicyNet net(cfg.net);
  const auto curve = train_order(net, cfg);
  net.save(out / "order.json");
  write_order_curve(out / "order_curve.csv", curve);
  std::printf("trained %d steps, final moving-average cost %.3f\n", cfg.steps,
              curve.back().moving_avg);
  return 0;
}

int sim_run(const fs::path& config, const std::string& policy_name, const std::string& mode,
            const std::string& alloc_ckpt, const std::string& order_ckpt, const fs::path& out) {
  const SimConfig sim = SimConfig::from_json(read_json_file(config));
  std::optional<DdpgAgent> agent;
  std::optional<OrderPolicyNet> order;
  if (policy_name == "proposed") {
    if (alloc_ckpt.empty()) throw MissingCheckpoint("--alloc is required for proposed");
    agent = DdpgAgent::load(alloc_ckpt);
  }
  if (!order_ckpt.empty()) order = OrderPolicyNet::load(order_ckpt);
  auto policy = make_policy(policy_name,
                            mode == "alloc-only" ? BaselineMode::AllocOnly : BaselineMode::Full,
                            sim.seed, agent ? &*agent : nullptr, order ? &*order : nullptr);
  const EpisodeTrace trace = run_episode(sim, *policy);
  trace.write_csv(out / "trace.csv");
  write_json_file(trace.summary(), out / "summary.json");
  std::printf("%s: total welfare %.3f over %zu slots\n", trace.policy.c_str(),
              trace.total_welfare, trace.steps.size());
  return 0;
}

int bench_run(const fs::path& spec_path, const fs::path& out) {
  const ExperimentSpec spec =
      ExperimentSpec::from_json(read_json_file(spec_path), spec_path.parent_path());
  const MetricTable table = run_matrix(spec);
  table.write(out);
  for (const auto& c : table.cells)
    if (c.view == "global")
      std::printf("N=%-3d %-10s welfare %10.3f  %.4f s/200 slots\n", c.num_bs,
                  c.policy.c_str(), c.mean, c.seconds_per_200);
  for (const auto& f : table.failures) std::fprintf(stderr, "invariant failed: %s\n", f.c_str());
  return table.failures.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative edge computing scheduler"};
  app.require_subcommand(1);

  auto* oracle = app.add_subcommand("oracle", "Brute-force checks");
  oracle->require_subcommand(1);
  auto* check = oracle->add_subcommand("check", "Compare the DP against the exhaustive oracle");
  std::string instance_path;
  std::optional<int> bs;
  std::string family = "trimmed";
  check->add_option("instance", instance_path, "Instance JSON")->required();
  check->add_option("--bs", bs, "BS whose offer is used");
  check->add_option("--family", family, "Oracle plan family")
      ->check(CLI::IsMember({"trimmed", "binary"}));

  auto* train = app.add_subcommand("train", "Train a learned component");
  train->require_subcommand(1);
  std::string train_config, train_out = "out";
  auto* alloc = train->add_subcommand("alloc", "Stage-1 allocation agent");
  auto* order = train->add_subcommand("order", "Stage-2 ordering policy");
  for (auto* sub : {alloc, order}) {
    sub->add_option("--config", train_config, "Training config JSON")->required();
    sub->add_option("--out", train_out, "Output directory");
  }

  auto* sim = app.add_subcommand("sim", "Simulate episodes");
  sim->require_subcommand(1);
  auto* run = sim->add_subcommand("run", "Run one episode");
  std::string sim_config, policy = "greedy", mode = "full", alloc_ckpt, order_ckpt,
                          sim_out = "out";
  run->add_option("--config", sim_config, "Simulator config JSON")->required();
  run->add_option("--policy", policy)
      ->check(CLI::IsMember({"proposed", "greedy", "random", "reject-all"}));
  run->add_option("--mode", mode, "full or alloc-only (stage 2 by the DP)")
      ->check(CLI::IsMember({"full", "alloc-only"}));
  run->add_option("--alloc", alloc_ckpt, "Allocation checkpoint (proposed)");
  run->add_option("--order", order_ckpt, "Order checkpoint (optional)");
  run->add_option("--out", sim_out, "Output directory");

  auto* bench = app.add_subcommand("bench", "Experiment matrix");
  bench->require_subcommand(1);
  auto* brun = bench->add_subcommand("run", "Run every cell of a spec");
  std::string spec_path, bench_out = "out";
  brun->add_option("--spec", spec_path, "Experiment spec JSON")->required();
  brun->add_option("--out", bench_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return oracle_check(instance_path, bs, family);
    if (alloc->parsed()) return train_alloc_cmd(train_config, train_out);
    if (order->parsed()) return train_order_cmd(train_config, train_out);
    if (run->parsed())
      return sim_run(sim_config, policy, mode, alloc_ckpt, order_ckpt, sim_out);
    if (brun->parsed()) return bench_run(spec_path, bench_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
