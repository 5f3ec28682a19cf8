#pragma once

// Learned processing order for one BS. A shared encoder embeds each task
// (its own features plus the BS's prices and capacities); a query network
// reads [mean of all embeddings; mean of the unselected ones; last pick]
// and scores the remaining tasks by dot product. Trained with REINFORCE on
// the DP's execution cost, using the greedy rollout as baseline.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cec/exec_solver.hpp"
#include "cec/instances.hpp"
#include "cec/nn.hpp"

namespace cec {

struct OrderNetConfig {
  int horizon = 6;
  int max_tasks = 10;
  int hidden = 64;
  int embed = 32;
  double workload_scale = 20e6;
  double utility_scale = 500.0;
  double alpha_scale = 90.0;
  double lr = 1e-3;
  std::uint64_t seed = 1;

  int feature_size() const { return 7 + 2 * horizon; }
  void validate() const;
  static OrderNetConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// One column per task: w, alpha, u0, alpha/w and the total workload of the
// set (all scaled); the slot the task would finish in if run first, and if
// run after all the others (both over delta); then the offer's cumulative
// work through each slot in workload units and its prices relative to the
// offer's highest price.
Eigen::MatrixXd encode_order_features(std::span<const OffloadRequest> tasks,
                                      const ResourceOffer& offer, const SlotGrid& grid,
                                      const OrderNetConfig& config);

enum class DecodeMode { Sample, Greedy };

struct OrderRollout {
  ProcessingOrder order;
  double log_prob = 0.0;
};

class OrderPolicyNet {
 public:
  explicit OrderPolicyNet(OrderNetConfig config);

  const OrderNetConfig& config() const { return config_; }
  nn::DenseNet& encoder() { return encoder_; }
  nn::DenseNet& query() { return query_; }
  const nn::DenseNet& encoder() const { return encoder_; }
  const nn::DenseNet& query() const { return query_; }

  // rng is required in Sample mode.
  OrderRollout emit_order(const Eigen::MatrixXd& features, DecodeMode mode,
                          std::mt19937_64* rng = nullptr) const;

  double log_prob(const Eigen::MatrixXd& features, const ProcessingOrder& order) const;

  // Adds weight * d log pi(order) / d theta into the two gradient buffers.
  // Returns log pi(order).
  double accumulate_log_prob_grad(const Eigen::MatrixXd& features,
                                  const ProcessingOrder& order, double weight,
                                  std::span<double> encoder_grad,
                                  std::span<double> query_grad) const;

  nlohmann::json to_json() const;
  static OrderPolicyNet from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static OrderPolicyNet load(const std::filesystem::path& path);

 private:
  struct Pass;
  Pass run(const Eigen::MatrixXd& features, DecodeMode mode, std::mt19937_64* rng,
           const ProcessingOrder* forced) const;

  OrderNetConfig config_;
  nn::DenseNet encoder_;
  nn::DenseNet query_;
};

// Gamma_e of the DP plan for a given order.
double order_cost(const BsInstance& inst, const ProcessingOrder& order);

enum class BaselineKind { GreedyRollout, BatchMean };

struct ReinforceReport {
  double loss = 0.0;
  std::vector<double> rewards;     // -Gamma_e of the sampled orders
  std::vector<double> baselines;   // per instance
  std::vector<double> advantages;  // reward - baseline
  double mean_sampled_cost = 0.0;
  double mean_greedy_cost = 0.0;
};

class OrderTrainer {
 public:
  OrderTrainer(OrderPolicyNet& net, std::uint64_t seed);

  // One Adam step on sum_b (R_b - baseline_b) * grad log pi(sigma_b) / B.
  ReinforceReport reinforce_step(std::span<const BsInstance> batch,
                                 BaselineKind baseline = BaselineKind::GreedyRollout);

 private:
  OrderPolicyNet& net_;
  nn::Adam enc_opt_, query_opt_;
  std::mt19937_64 rng_;
};

struct RatioStats {
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

// Gamma_e(provider + DP) / Gamma_e(oracle optimum). Throws InstanceTooLarge
// when an instance exceeds the oracle limits.
RatioStats eval_ratio(const OrderProvider& provider, std::span<const BsInstance> instances,
                      OracleLimits limits = {});

// Greedy-decoded learned order.
OrderProvider learned_provider(const OrderPolicyNet& net);

// Learned order only where its DP cost is no higher than smith_order's.
OrderProvider guarded_provider(const OrderPolicyNet& net);

struct OrderTrainConfig {
  InstanceParams instances;
  OrderNetConfig net;
  int steps = 2000;
  int batch = 16;
  int window = 50;
  std::uint64_t seed = 1;

  static OrderTrainConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct OrderCurvePoint {
  int step = 0;
  double cost = 0.0;  // mean greedy-decoded cost of the batch
  double moving_avg = 0.0;
  double loss = 0.0;
};

std::vector<OrderCurvePoint> train_order(OrderPolicyNet& net, const OrderTrainConfig& config);

void write_order_curve(const std::filesystem::path& path,
                       const std::vector<OrderCurvePoint>& curve);

}  // namespace cec
