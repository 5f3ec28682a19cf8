#pragma once

// Stage-1 allocation agent. Requests are cut into groups of K (the last one
// padded with all-zero dummy tasks); for each group the actor emits K(N+1)
// logits, one softmax block per task over {Reject, BS 1..N}.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cec/exec_solver.hpp"
#include "cec/nn.hpp"
#include "cec/sim.hpp"

namespace cec {

struct TaskGroup {
  std::vector<OffloadRequest> tasks;  // real tasks; positions >= size are dummies
};

std::vector<TaskGroup> group_tasks(std::span<const OffloadRequest> requests, int k);

struct DdpgConfig {
  int num_bs = 10;
  int horizon = 10;
  int group_size = 5;
  std::vector<int> hidden = {128, 128};
  nn::Activation hidden_activation = nn::Activation::Tanh;
  double gamma = 0.95;
  double omega = 0.01;
  std::size_t buffer_capacity = 100000;
  int batch_size = 64;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double noise_start = 1.0;
  double noise_end = 0.05;
  // Rewards are multiplied by this before they enter the buffer.
  double reward_scale = 1e-2;
  double capacity_scale = 40e9;
  double workload_scale = 20e6;
  double utility_scale = 500.0;
  double alpha_scale = 90.0;
  std::uint64_t seed = 1;

  int obs_size() const { return num_bs * 2 * horizon + 3 * group_size; }
  int action_size() const { return group_size * (num_bs + 1); }
  void validate() const;
  static DdpgConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// Running maximum of observed prices, used to scale price features.
struct PriceScale {
  double max_price = 0.0;
  void update(std::span<const ResourceOffer> offers);
  double normalize(double p) const { return max_price > 0.0 ? p / max_price : 0.0; }
};

// N*2*delta offer features (capacities then prices per BS, ordered by
// position in `offers`) followed by 3 features per group slot.
Eigen::VectorXd encode_observation(std::span<const ResourceOffer> offers,
                                   const TaskGroup& group, const DdpgConfig& config,
                                   const PriceScale& prices);

// Number of leading non-dummy task blocks in an encoded observation.
int real_tasks_in(const Eigen::VectorXd& obs, const DdpgConfig& config);

struct AllocAction {
  std::vector<double> probs;  // K*(N+1), block j = task j
  std::vector<int> targets;   // K entries, kReject for dummies
};

std::vector<double> one_hot_targets(std::span<const int> targets, int num_bs);

struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }
  // Uniform with replacement over filled entries.
  std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n) const;

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> data_;
};

struct LossReport {
  double critic_loss = 0.0;
  double mean_q = 0.0;
};

class DdpgAgent {
 public:
  explicit DdpgAgent(DdpgConfig config);

  const DdpgConfig& config() const { return config_; }
  nn::DenseNet& actor() { return actor_; }
  nn::DenseNet& critic() { return critic_; }
  nn::DenseNet& target_actor() { return target_actor_; }
  nn::DenseNet& target_critic() { return target_critic_; }
  const nn::DenseNet& actor() const { return actor_; }
  PriceScale& prices() { return prices_; }
  const PriceScale& prices() const { return prices_; }

  // Per-block softmax of the actor output; dummy blocks become one-hot Reject.
  std::vector<double> policy_probs(const Eigen::VectorXd& obs) const;

  // explore: Gaussian noise of scale `noise` on the logits, then a draw from
  // each block's softmax. Otherwise argmax. Dummies always decode to Reject.
  AllocAction act(const Eigen::VectorXd& obs, bool explore, double noise = 0.0);

  double q_value(const Eigen::VectorXd& obs, std::span<const double> action) const;
  double td_target(const Transition& t) const;

  LossReport train_step(const ReplayBuffer& buffer, std::size_t batch_size);

  // Mean squared error of Q(x) against y; adds its critic gradient to `grad`.
  double critic_loss_grad(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y,
                          std::span<double> grad) const;
  // -mean Q(s, softmax(actor(s))) with real[c] live blocks in column c; adds
  // its actor gradient to `grad`.
  double actor_loss_grad(const Eigen::MatrixXd& s, std::span<const int> real,
                         std::span<double> grad) const;

  nlohmann::json to_json() const;
  static DdpgAgent from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static DdpgAgent load(const std::filesystem::path& path);

 private:
  DdpgConfig config_;
  nn::DenseNet actor_, critic_, target_actor_, target_critic_;
  nn::Adam actor_opt_, critic_opt_;
  PriceScale prices_;
  std::mt19937_64 rng_;
};

// Reward of a decoded allocation with stage 2 solved per BS.
double stage1_reward(const SystemState& state, std::span<const int> targets,
                     const OrderProvider& provider);

// DDPG allocation followed by DP execution. Groups are decided one after
// the other, each seeing offers net of the plans already made this slot.
class TwoStagePolicy : public Policy {
 public:
  // Called once per group with (obs, one-hot action, group surplus).
  using Recorder =
      std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>;

  TwoStagePolicy(DdpgAgent& agent, OrderProvider provider);
  std::string name() const override { return "proposed"; }
  SlotAction decide(const SystemState& state) override;

  void set_exploration(bool on, double noise) {
    explore_ = on;
    noise_ = noise;
  }
  void set_recorder(Recorder r) { recorder_ = std::move(r); }

 private:
  DdpgAgent& agent_;
  OrderProvider provider_;
  bool explore_ = false;
  double noise_ = 0.0;
  Recorder recorder_;
};

struct AllocTrainConfig {
  SimConfig sim;
  DdpgConfig agent;
  int episodes = 300;
  int warmup = 256;  // transitions before the first update
  int updates_per_transition = 1;
  int noise_decay_episodes = 200;
  int window = 50;

  static AllocTrainConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct AllocCurvePoint {
  int episode = 0;
  double welfare = 0.0;
  double moving_avg = 0.0;
  double critic_loss = 0.0;
};

struct AllocTrainResult {
  std::vector<AllocCurvePoint> curve;
  std::size_t updates = 0;
};

// Called after every training episode.
using AllocEpisodeHook = std::function<void(const AllocCurvePoint&)>;

// Episode e runs the simulator with seed sim.seed + e.
AllocTrainResult train_alloc(DdpgAgent& agent, const AllocTrainConfig& config,
                             const OrderProvider& provider = smith_provider(),
                             const AllocEpisodeHook& hook = {});

void write_alloc_curve(const std::filesystem::path& path,
                       const std::vector<AllocCurvePoint>& curve);

// DdpgConfig shape fields taken from the simulator config.
DdpgConfig shaped_for(const SimConfig& sim, DdpgConfig base);

}  // namespace cec
