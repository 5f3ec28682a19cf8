#include "cec/alloc_ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "cec/errors.hpp"
#include "cec/instance_io.hpp"

namespace cec {

std::vector<TaskGroup> group_tasks(std::span<const OffloadRequest> requests, int k) {
  if (k < 1) throw InvalidInput("group size must be at least 1");
  std::vector<TaskGroup> groups;
  for (std::size_t i = 0; i < requests.size(); i += k) {
    TaskGroup g;
    const std::size_t end = std::min(requests.size(), i + static_cast<std::size_t>(k));
    g.tasks.assign(requests.begin() + i, requests.begin() + end);
    groups.push_back(std::move(g));
  }
  return groups;
}

void DdpgConfig::validate() const {
  if (num_bs < 1 || horizon < 1 || group_size < 1) throw InvalidInput("bad agent shape");
  if (hidden.empty()) throw InvalidInput("need at least one hidden layer");
  if (gamma < 0.0 || gamma > 1.0) throw InvalidInput("discount must lie in [0,1]");
  if (!(omega > 0.0 && omega <= 1.0)) throw InvalidInput("soft-update rate must lie in (0,1]");
  if (buffer_capacity < 1 || batch_size < 1) throw InvalidInput("bad buffer sizes");
  if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw InvalidInput("learning rates must be positive");
  if (noise_start < 0.0 || noise_end < 0.0) throw InvalidInput("noise must be nonnegative");
}

DdpgConfig DdpgConfig::from_json(const nlohmann::json& doc) {
  DdpgConfig c;
  c.num_bs = doc.value("num_bs", c.num_bs);
  c.horizon = doc.value("delta", c.horizon);
  c.group_size = doc.value("group_size", c.group_size);
  c.hidden = doc.value("hidden", c.hidden);
  if (doc.contains("hidden_activation"))
    c.hidden_activation = nn::activation_from_name(doc["hidden_activation"].get<std::string>());
  c.gamma = doc.value("gamma", c.gamma);
  c.omega = doc.value("omega", c.omega);
  c.buffer_capacity = doc.value("buffer_capacity", c.buffer_capacity);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.actor_lr = doc.value("actor_lr", c.actor_lr);
  c.critic_lr = doc.value("critic_lr", c.critic_lr);
  c.noise_start = doc.value("noise_start", c.noise_start);
  c.noise_end = doc.value("noise_end", c.noise_end);
  c.reward_scale = doc.value("reward_scale", c.reward_scale);
  c.capacity_scale = doc.value("capacity_scale", c.capacity_scale);
  c.workload_scale = doc.value("workload_scale", c.workload_scale);
  c.utility_scale = doc.value("utility_scale", c.utility_scale);
  c.alpha_scale = doc.value("alpha_scale", c.alpha_scale);
  c.seed = doc.value("seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json DdpgConfig::to_json() const {
  return {{"num_bs", num_bs},           {"delta", horizon},
          {"group_size", group_size},   {"hidden", hidden},
          {"hidden_activation", nn::activation_name(hidden_activation)},
          {"gamma", gamma},             {"omega", omega},
          {"buffer_capacity", buffer_capacity},
          {"batch_size", batch_size},   {"actor_lr", actor_lr},
          {"critic_lr", critic_lr},     {"noise_start", noise_start},
          {"noise_end", noise_end},     {"reward_scale", reward_scale},
          {"capacity_scale", capacity_scale},
          {"workload_scale", workload_scale},
          {"utility_scale", utility_scale},
          {"alpha_scale", alpha_scale}, {"seed", seed}};
}

DdpgConfig shaped_for(const SimConfig& sim, DdpgConfig base) {
  base.num_bs = sim.num_bs;
  base.horizon = sim.horizon;
  base.group_size = sim.group_size;
  base.gamma = sim.gamma;
  base.capacity_scale = sim.raw_max_hz;
  return base;
}

void PriceScale::update(std::span<const ResourceOffer> offers) {
  for (const auto& o : offers) max_price = std::max(max_price, o.max_price());
}

Eigen::VectorXd encode_observation(std::span<const ResourceOffer> offers,
                                   const TaskGroup& group, const DdpgConfig& config,
                                   const PriceScale& prices) {
  if (static_cast<int>(offers.size()) != config.num_bs)
    throw ShapeMismatch("observation expects " + std::to_string(config.num_bs) + " offers");
  if (static_cast<int>(group.tasks.size()) > config.group_size)
    throw ShapeMismatch("group larger than K");
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(config.obs_size());
  int at = 0;
  for (const auto& o : offers) {
    if (static_cast<int>(o.capacity.size()) != config.horizon)
      throw ShapeMismatch("offer horizon differs from agent horizon");
    for (int k = 0; k < config.horizon; ++k) obs[at++] = o.capacity[k] / config.capacity_scale;
    for (int k = 0; k < config.horizon; ++k) obs[at++] = prices.normalize(o.price[k]);
  }
  for (const auto& t : group.tasks) {
    obs[at++] = t.workload / config.workload_scale;
    obs[at++] = t.max_utility / config.utility_scale;
    obs[at++] = t.latency_penalty / config.alpha_scale;
  }
  return obs;
}

int real_tasks_in(const Eigen::VectorXd& obs, const DdpgConfig& config) {
  const int base = config.num_bs * 2 * config.horizon;
  int n = 0;
  while (n < config.group_size && obs[base + 3 * n] != 0.0) ++n;
  return n;
}

std::vector<double> one_hot_targets(std::span<const int> targets, int num_bs) {
  std::vector<double> v(targets.size() * (num_bs + 1), 0.0);
  for (std::size_t j = 0; j < targets.size(); ++j) {
    if (targets[j] < 0 || targets[j] > num_bs) throw InvalidInput("target out of range");
    v[j * (num_bs + 1) + targets[j]] = 1.0;
  }
  return v;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidInput("replay buffer needs positive capacity");
  data_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::mt19937_64& rng,
                                                      std::size_t n) const {
  if (data_.size() < n || data_.empty())
    throw BufferUnderfull("buffer holds " + std::to_string(data_.size()) +
                          " transitions, batch needs " + std::to_string(n));
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

namespace {

std::vector<nn::Activation> hidden_acts(std::size_t hidden_layers, nn::Activation act) {
  std::vector<nn::Activation> a(hidden_layers, act);
  a.push_back(nn::Activation::Identity);
  return a;
}

std::vector<int> layers(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

// Column-wise block softmax; blocks at or beyond real[c] become one-hot Reject.
Eigen::MatrixXd block_softmax(const Eigen::MatrixXd& logits, const std::vector<int>& real,
                              int blocks, int width) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    for (int j = 0; j < blocks; ++j) {
      if (j >= real[c]) {
        p(j * width, c) = 1.0;
        continue;
      }
      const double mx = logits.col(c).segment(j * width, width).maxCoeff();
      double sum = 0.0;
      for (int i = 0; i < width; ++i) {
        p(j * width + i, c) = std::exp(logits(j * width + i, c) - mx);
        sum += p(j * width + i, c);
      }
      p.col(c).segment(j * width, width) /= sum;
    }
  }
  return p;
}

}  // namespace

DdpgAgent::DdpgAgent(DdpgConfig config) : config_(std::move(config)) {
  config_.validate();
  const int obs = config_.obs_size();
  const int act = config_.action_size();
  const auto acts = hidden_acts(config_.hidden.size(), config_.hidden_activation);
  actor_ = nn::DenseNet(layers(obs, config_.hidden, act), acts, config_.seed * 4 + 1);
  critic_ = nn::DenseNet(layers(obs + act, config_.hidden, 1), acts, config_.seed * 4 + 2);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = nn::Adam(actor_.param_count(), {config_.actor_lr});
  critic_opt_ = nn::Adam(critic_.param_count(), {config_.critic_lr});
  rng_.seed(config_.seed * 4 + 3);
}

std::vector<double> DdpgAgent::policy_probs(const Eigen::VectorXd& obs) const {
  const Eigen::MatrixXd p = block_softmax(actor_.forward(obs), {real_tasks_in(obs, config_)},
                                          config_.group_size, config_.num_bs + 1);
  return {p.data(), p.data() + p.size()};
}

AllocAction DdpgAgent::act(const Eigen::VectorXd& obs, bool explore, double noise) {
  const int width = config_.num_bs + 1;
  const int real = real_tasks_in(obs, config_);
  Eigen::VectorXd logits = actor_.forward(obs);
  AllocAction a;
  a.probs.assign(config_.action_size(), 0.0);
  a.targets.assign(config_.group_size, kReject);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int j = 0; j < config_.group_size; ++j) {
    if (j >= real) {
      a.probs[j * width] = 1.0;
      continue;
    }
    std::vector<double> block(logits.data() + j * width, logits.data() + (j + 1) * width);
    if (explore && noise > 0.0)
      for (double& x : block) x += noise * gauss(rng_);
    const auto p = nn::softmax(block);
    std::copy(p.begin(), p.end(), a.probs.begin() + j * width);
    if (explore) {
      std::discrete_distribution<int> draw(p.begin(), p.end());
      a.targets[j] = draw(rng_);
    } else {
      a.targets[j] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }
  }
  return a;
}

double DdpgAgent::q_value(const Eigen::VectorXd& obs, std::span<const double> action) const {
  Eigen::VectorXd x(obs.size() + static_cast<Eigen::Index>(action.size()));
  x.head(obs.size()) = obs;
  x.tail(action.size()) = Eigen::Map<const Eigen::VectorXd>(action.data(), action.size());
  return critic_.forward(x)(0, 0);
}

double DdpgAgent::td_target(const Transition& t) const {
  if (t.terminal || config_.gamma == 0.0) return t.reward;
  const Eigen::MatrixXd p =
      block_softmax(target_actor_.forward(t.next_obs), {real_tasks_in(t.next_obs, config_)},
                    config_.group_size, config_.num_bs + 1);
  Eigen::VectorXd x(t.next_obs.size() + p.size());
  x << t.next_obs, p.col(0);
  return t.reward + config_.gamma * target_critic_.forward(x)(0, 0);
}

LossReport DdpgAgent::train_step(const ReplayBuffer& buffer, std::size_t batch_size) {
  const auto idx = buffer.sample_indices(rng_, batch_size);
  const int obs_n = config_.obs_size();
  const int act_n = config_.action_size();
  const int width = config_.num_bs + 1;
  const auto b = static_cast<Eigen::Index>(batch_size);

  Eigen::MatrixXd s(obs_n, b), s2(obs_n, b), a(act_n, b);
  Eigen::RowVectorXd r(b), live(b);
  std::vector<int> real(b), real2(b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Transition& t = buffer.at(idx[c]);
    s.col(c) = t.obs;
    a.col(c) = t.action;
    r[c] = t.reward;
    live[c] = t.terminal ? 0.0 : 1.0;
    s2.col(c) = t.terminal ? t.obs : t.next_obs;
    real[c] = real_tasks_in(t.obs, config_);
    real2[c] = real_tasks_in(s2.col(c), config_);
  }

  // Critic regression onto y = r + gamma * Q'(s', pi'(s')).
  Eigen::MatrixXd x2(obs_n + act_n, b);
  x2 << s2, block_softmax(target_actor_.forward(s2), real2, config_.group_size, width);
  const Eigen::RowVectorXd y =
      r + config_.gamma * live.cwiseProduct(target_critic_.forward(x2).row(0));

  Eigen::MatrixXd x(obs_n + act_n, b);
  x << s, a;
  LossReport report;
  std::vector<double> cgrad(critic_.param_count(), 0.0);
  report.critic_loss = critic_loss_grad(x, y, cgrad);
  critic_opt_.step(critic_.params(), cgrad);

  std::vector<double> agrad(actor_.param_count(), 0.0);
  report.mean_q = -actor_loss_grad(s, real, agrad);
  actor_opt_.step(actor_.params(), agrad);

  nn::soft_update(target_critic_.params(), critic_.params(), config_.omega);
  nn::soft_update(target_actor_.params(), actor_.params(), config_.omega);
  return report;
}

double DdpgAgent::critic_loss_grad(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y,
                                   std::span<double> grad) const {
  const double b = static_cast<double>(x.cols());
  nn::DenseNet::Tape tape;
  const Eigen::RowVectorXd diff = critic_.forward(x, &tape).row(0) - y;
  critic_.backward(tape, 2.0 * diff / b, grad);
  return diff.squaredNorm() / b;
}

double DdpgAgent::actor_loss_grad(const Eigen::MatrixXd& s, std::span<const int> real,
                                  std::span<double> grad) const {
  const int act_n = config_.action_size();
  const int width = config_.num_bs + 1;
  const Eigen::Index b = s.cols();
  nn::DenseNet::Tape atape, tape;
  const Eigen::MatrixXd p =
      block_softmax(actor_.forward(s, &atape), {real.begin(), real.end()}, config_.group_size, width);
  Eigen::MatrixXd xp(s.rows() + act_n, b);
  xp << s, p;
  const double loss = -critic_.forward(xp, &tape).row(0).mean();
  std::vector<double> scratch(critic_.param_count(), 0.0);
  const Eigen::MatrixXd dx = critic_.backward(
      tape, Eigen::RowVectorXd::Constant(b, -1.0 / static_cast<double>(b)), scratch);
  const Eigen::MatrixXd dp = dx.bottomRows(act_n);
  // Softmax Jacobian per real block; dummy blocks are constants.
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(act_n, b);
  for (Eigen::Index c = 0; c < b; ++c)
    for (int j = 0; j < real[c]; ++j) {
      const auto pj = p.col(c).segment(j * width, width);
      const auto gj = dp.col(c).segment(j * width, width);
      const double dot = pj.dot(gj);
      dlogits.col(c).segment(j * width, width) =
          pj.cwiseProduct(gj - Eigen::VectorXd::Constant(width, dot));
    }
  actor_.backward(atape, dlogits, grad);
  return loss;
}

nlohmann::json DdpgAgent::to_json() const {
  return {{"kind", "alloc-ddpg"},
          {"config", config_.to_json()},
          {"actor", actor_.to_json()},
          {"critic", critic_.to_json()},
          {"target_actor", target_actor_.to_json()},
          {"target_critic", target_critic_.to_json()},
          {"actor_opt", actor_opt_.to_json()},
          {"critic_opt", critic_opt_.to_json()},
          {"max_price", prices_.max_price}};
}

DdpgAgent DdpgAgent::from_json(const nlohmann::json& doc) {
  if (doc.value("kind", "") != "alloc-ddpg")
    throw InvalidInput("not an allocation checkpoint");
  DdpgAgent a(DdpgConfig::from_json(doc.at("config")));
  auto load_net = [](nn::DenseNet& dst, const nlohmann::json& j) {
    nn::DenseNet n = nn::DenseNet::from_json(j);
    if (n.layer_sizes() != dst.layer_sizes())
      throw ShapeMismatch("checkpoint network shape differs from its config");
    dst = std::move(n);
  };
  load_net(a.actor_, doc.at("actor"));
  load_net(a.critic_, doc.at("critic"));
  load_net(a.target_actor_, doc.at("target_actor"));
  load_net(a.target_critic_, doc.at("target_critic"));
  if (doc.contains("actor_opt")) a.actor_opt_ = nn::Adam::from_json(doc["actor_opt"]);
  if (doc.contains("critic_opt")) a.critic_opt_ = nn::Adam::from_json(doc["critic_opt"]);
  a.prices_.max_price = doc.value("max_price", 0.0);
  return a;
}

void DdpgAgent::save(const std::filesystem::path& path) const { write_json_file(to_json(), path); }

DdpgAgent DdpgAgent::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw MissingCheckpoint("allocation checkpoint not found: " + path.string());
  return from_json(read_json_file(path));
}

double stage1_reward(const SystemState& state, std::span<const int> targets,
                     const OrderProvider& provider) {
  return solve_allocation(state.requests, targets, state.offers, state.grid, provider).surplus;
}

TwoStagePolicy::TwoStagePolicy(DdpgAgent& agent, OrderProvider provider)
    : agent_(agent), provider_(std::move(provider)) {}

SlotAction TwoStagePolicy::decide(const SystemState& state) {
  const DdpgConfig& cfg = agent_.config();
  if (explore_) agent_.prices().update(state.offers);
  std::vector<ResourceOffer> remaining = state.offers;
  SlotAction action;
  for (const auto& group : group_tasks(state.requests, cfg.group_size)) {
    const Eigen::VectorXd obs = encode_observation(remaining, group, cfg, agent_.prices());
    const AllocAction a = agent_.act(obs, explore_, noise_);
    std::vector<int> targets;
    for (std::size_t j = 0; j < group.tasks.size(); ++j)
      targets.push_back(a.targets[j] == kReject ? kReject : remaining[a.targets[j] - 1].bs_id);
    AllocationOutcome out =
        solve_allocation(group.tasks, targets, remaining, state.grid, provider_);
    for (const auto& s : out.schemes) {
      if (s.rejected()) continue;
      for (auto& o : remaining)
        if (o.bs_id == s.target) consume(o, s.exec);
    }
    if (recorder_) {
      const auto hot = one_hot_targets(a.targets, cfg.num_bs);
      recorder_(obs, Eigen::Map<const Eigen::VectorXd>(hot.data(), hot.size()), out.surplus);
    }
    for (auto& s : out.schemes) action.schemes.push_back(std::move(s));
  }
  return action;
}

AllocTrainConfig AllocTrainConfig::from_json(const nlohmann::json& doc) {
  AllocTrainConfig c;
  c.sim = SimConfig::from_json(doc.at("sim"));
  c.agent = shaped_for(c.sim, DdpgConfig::from_json(doc.value("agent", nlohmann::json::object())));
  c.episodes = doc.value("episodes", c.episodes);
  c.warmup = doc.value("warmup", c.warmup);
  c.updates_per_transition = doc.value("updates_per_transition", c.updates_per_transition);
  c.noise_decay_episodes = doc.value("noise_decay_episodes", c.noise_decay_episodes);
  c.window = doc.value("window", c.window);
  if (c.episodes < 1 || c.window < 1 || c.noise_decay_episodes < 1)
    throw InvalidInput("training budget must be positive");
  return c;
}

nlohmann::json AllocTrainConfig::to_json() const {
  return {{"sim", sim.to_json()},
          {"agent", agent.to_json()},
          {"episodes", episodes},
          {"warmup", warmup},
          {"updates_per_transition", updates_per_transition},
          {"noise_decay_episodes", noise_decay_episodes},
          {"window", window}};
}

AllocTrainResult train_alloc(DdpgAgent& agent, const AllocTrainConfig& config,
                             const OrderProvider& provider, const AllocEpisodeHook& hook) {
  const DdpgConfig& ac = agent.config();
  if (ac.num_bs != config.sim.num_bs || ac.horizon != config.sim.horizon ||
      ac.group_size != config.sim.group_size)
    throw ShapeMismatch("agent shape does not match the simulator");
  ReplayBuffer buffer(ac.buffer_capacity);
  const std::size_t ready = std::max<std::size_t>(config.warmup, ac.batch_size);
  AllocTrainResult result;
  std::optional<Transition> pending;
  double loss_sum = 0.0;
  int loss_n = 0;

  auto push = [&](Transition t) {
    buffer.push(std::move(t));
    if (buffer.size() < ready) return;
    for (int u = 0; u < config.updates_per_transition; ++u) {
      loss_sum += agent.train_step(buffer, ac.batch_size).critic_loss;
      ++loss_n;
      ++result.updates;
    }
  };

  TwoStagePolicy policy(agent, provider);
  policy.set_recorder([&](const Eigen::VectorXd& obs, const Eigen::VectorXd& act, double r) {
    if (pending) {
      pending->next_obs = obs;
      push(std::move(*pending));
    }
    pending = Transition{obs, act, r * ac.reward_scale, Eigen::VectorXd(), false};
  });

  std::vector<double> welfare;
  for (int e = 0; e < config.episodes; ++e) {
    const double frac =
        std::min(1.0, static_cast<double>(e) / static_cast<double>(config.noise_decay_episodes));
    policy.set_exploration(true, ac.noise_start + (ac.noise_end - ac.noise_start) * frac);
    SimConfig sim = config.sim;
    sim.seed = config.sim.seed + static_cast<std::uint64_t>(e);
    loss_sum = 0.0;
    loss_n = 0;
    const EpisodeTrace trace = run_episode(sim, policy);
    if (pending) {
      pending->next_obs = Eigen::VectorXd::Zero(ac.obs_size());
      pending->terminal = true;
      push(std::move(*pending));
      pending.reset();
    }
    welfare.push_back(trace.total_welfare);
    const auto ma = moving_average(welfare, config.window);
    result.curve.push_back({e, trace.total_welfare, ma.back(),
                            loss_n ? loss_sum / loss_n : 0.0});
    if (hook) hook(result.curve.back());
  }
  return result;
}

void write_alloc_curve(const std::filesystem::path& path,
                       const std::vector<AllocCurvePoint>& curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.precision(12);
  out << "episode,moving_avg_welfare,critic_loss\n";
  for (const auto& p : curve)
    out << p.episode << ',' << p.moving_avg << ',' << p.critic_loss << '\n';
}

}  // namespace cec
