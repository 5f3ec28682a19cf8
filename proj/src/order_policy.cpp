#include "cec/order_policy.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "cec/errors.hpp"
#include "cec/instance_io.hpp"

namespace cec {

void OrderNetConfig::validate() const {
  if (horizon < 1 || max_tasks < 1 || hidden < 1 || embed < 1)
    throw InvalidInput("bad order network shape");
  if (!(lr > 0.0)) throw InvalidInput("learning rate must be positive");
}

OrderNetConfig OrderNetConfig::from_json(const nlohmann::json& doc) {
  OrderNetConfig c;
  c.horizon = doc.value("delta", c.horizon);
  c.max_tasks = doc.value("max_tasks", c.max_tasks);
  c.hidden = doc.value("hidden", c.hidden);
  c.embed = doc.value("embed", c.embed);
  c.workload_scale = doc.value("workload_scale", c.workload_scale);
  c.utility_scale = doc.value("utility_scale", c.utility_scale);
  c.alpha_scale = doc.value("alpha_scale", c.alpha_scale);
  c.lr = doc.value("lr", c.lr);
  c.seed = doc.value("seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json OrderNetConfig::to_json() const {
  return {{"delta", horizon},
          {"max_tasks", max_tasks},
          {"hidden", hidden},
          {"embed", embed},
          {"workload_scale", workload_scale},
          {"utility_scale", utility_scale},
          {"alpha_scale", alpha_scale},
          {"lr", lr},
          {"seed", seed}};
}

namespace {

// Offset at which a full-capacity fill of `work` starting at `start`
// finishes; the horizon length when it does not.
int forward_finish(const ResourceOffer& offer, const SlotGrid& grid, int start, double work) {
  for (int k = std::max(start, 0); k < grid.horizon; ++k) {
    work -= offer.capacity[k] * grid.delta_t;
    if (work <= kWorkRelTol * offer.capacity[k] * grid.delta_t) return k;
  }
  return grid.horizon;
}

}  // namespace

Eigen::MatrixXd encode_order_features(std::span<const OffloadRequest> tasks,
                                      const ResourceOffer& offer, const SlotGrid& grid,
                                      const OrderNetConfig& config) {
  if (tasks.empty()) throw InvalidInput("no tasks to order");
  if (static_cast<int>(tasks.size()) > config.max_tasks)
    throw ShapeMismatch("more tasks than the order network supports");
  if (static_cast<int>(offer.capacity.size()) != config.horizon)
    throw ShapeMismatch("offer horizon differs from the order network's");
  const double pmax = offer.max_price();
  double total = 0.0;
  for (const auto& t : tasks) total += t.workload;
  Eigen::MatrixXd f(config.feature_size(), static_cast<Eigen::Index>(tasks.size()));
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    auto c = f.col(static_cast<Eigen::Index>(i));
    c[0] = tasks[i].workload / config.workload_scale;
    c[1] = tasks[i].latency_penalty / config.alpha_scale;
    c[2] = tasks[i].max_utility / config.utility_scale;
    c[3] = c[1] / c[0];
    c[4] = total / config.workload_scale;
    const double h = static_cast<double>(config.horizon);
    c[5] = forward_finish(offer, grid, 0, tasks[i].workload) / h;
    const double others = total - tasks[i].workload;
    const int after = others > 0.0 ? forward_finish(offer, grid, 0, others) + 1 : 0;
    c[6] = forward_finish(offer, grid, after, tasks[i].workload) / h;
    double cum = 0.0;
    for (int k = 0; k < config.horizon; ++k) {
      cum += offer.capacity[k] * grid.delta_t / config.workload_scale;
      c[7 + k] = cum;
      c[7 + config.horizon + k] = pmax > 0.0 ? offer.price[k] / pmax : 0.0;
    }
  }
  return f;
}

struct OrderPolicyNet::Pass {
  nn::DenseNet::Tape enc_tape, query_tape;
  Eigen::MatrixXd emb;    // embed x n
  Eigen::MatrixXd ctx;    // 3 embed x n, one column per step
  Eigen::MatrixXd q;      // embed x n
  Eigen::MatrixXd probs;  // n steps x n tasks, zero where already chosen
  std::vector<std::vector<bool>> remaining;  // before each step
  ProcessingOrder order;
  double log_prob = 0.0;
};

OrderPolicyNet::OrderPolicyNet(OrderNetConfig config) : config_(std::move(config)) {
  config_.validate();
  using nn::Activation;
  encoder_ = nn::DenseNet({config_.feature_size(), config_.hidden, config_.embed},
                          {Activation::Tanh, Activation::Tanh}, config_.seed * 2 + 1);
  query_ = nn::DenseNet({3 * config_.embed, config_.hidden, config_.embed},
                        {Activation::Tanh, Activation::Identity}, config_.seed * 2 + 2);
}

OrderPolicyNet::Pass OrderPolicyNet::run(const Eigen::MatrixXd& features, DecodeMode mode,
                                         std::mt19937_64* rng,
                                         const ProcessingOrder* forced) const {
  const int n = static_cast<int>(features.cols());
  const int e = config_.embed;
  if (n < 1) throw InvalidInput("no tasks to order");
  if (forced && !forced->is_permutation_of(n)) throw InvalidInput("order is not a permutation");
  if (!forced && mode == DecodeMode::Sample && !rng)
    throw InvalidInput("sampling needs a random generator");
  const double inv = 1.0 / std::sqrt(static_cast<double>(e));

  Pass p;
  p.emb = encoder_.forward(features, &p.enc_tape);
  p.ctx = Eigen::MatrixXd::Zero(3 * e, n);
  p.probs = Eigen::MatrixXd::Zero(n, n);
  const Eigen::VectorXd mean_all = p.emb.rowwise().mean();
  std::vector<bool> left(n, true);
  // The query for step t depends on picks before t, so steps run one by one.
  p.q = Eigen::MatrixXd::Zero(e, n);
  for (int t = 0; t < n; ++t) {
    Eigen::VectorXd mean_rem = Eigen::VectorXd::Zero(e);
    int count = 0;
    for (int i = 0; i < n; ++i)
      if (left[i]) {
        mean_rem += p.emb.col(i);
        ++count;
      }
    mean_rem /= count;
    p.ctx.col(t).segment(0, e) = mean_all;
    p.ctx.col(t).segment(e, e) = mean_rem;
    if (t > 0) p.ctx.col(t).segment(2 * e, e) = p.emb.col(p.order.sequence.back());
    const Eigen::VectorXd q = query_.forward(p.ctx.col(t));
    p.q.col(t) = q;

    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> score(n, 0.0);
    for (int i = 0; i < n; ++i)
      if (left[i]) {
        score[i] = inv * q.dot(p.emb.col(i));
        mx = std::max(mx, score[i]);
      }
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      if (left[i]) {
        p.probs(t, i) = std::exp(score[i] - mx);
        sum += p.probs(t, i);
      }
    p.probs.row(t) /= sum;

    int pick = -1;
    if (forced) {
      pick = forced->sequence[t];
    } else if (mode == DecodeMode::Greedy) {
      for (int i = 0; i < n; ++i)
        if (left[i] && (pick < 0 || p.probs(t, i) > p.probs(t, pick))) pick = i;
    } else {
      std::vector<double> w(n);
      for (int i = 0; i < n; ++i) w[i] = p.probs(t, i);
      std::discrete_distribution<int> draw(w.begin(), w.end());
      pick = draw(*rng);
    }
    p.remaining.push_back(left);
    p.log_prob += std::log(p.probs(t, pick));
    p.order.sequence.push_back(pick);
    left[pick] = false;
  }
  // Re-run the query network over all steps at once for the backward tape.
  query_.forward(p.ctx, &p.query_tape);
  return p;
}

OrderRollout OrderPolicyNet::emit_order(const Eigen::MatrixXd& features, DecodeMode mode,
                                        std::mt19937_64* rng) const {
  Pass p = run(features, mode, rng, nullptr);
  return {std::move(p.order), p.log_prob};
}

double OrderPolicyNet::log_prob(const Eigen::MatrixXd& features,
                                const ProcessingOrder& order) const {
  return run(features, DecodeMode::Greedy, nullptr, &order).log_prob;
}

double OrderPolicyNet::accumulate_log_prob_grad(const Eigen::MatrixXd& features,
                                                const ProcessingOrder& order, double weight,
                                                std::span<double> encoder_grad,
                                                std::span<double> query_grad) const {
  const Pass p = run(features, DecodeMode::Greedy, nullptr, &order);
  const int n = static_cast<int>(features.cols());
  const int e = config_.embed;
  const double inv = 1.0 / std::sqrt(static_cast<double>(e));

  // d log pi / d score(t, i) = [i picked at t] - prob(t, i) over remaining i.
  Eigen::MatrixXd g = -p.probs;
  for (int t = 0; t < n; ++t) g(t, p.order.sequence[t]) += 1.0;
  g *= weight;

  Eigen::MatrixXd de = inv * p.q * g;                   // e x n
  const Eigen::MatrixXd dq = inv * p.emb * g.transpose();  // e x steps
  const Eigen::MatrixXd dctx = query_.backward(p.query_tape, dq, query_grad);
  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd d_all = dctx.col(t).segment(0, e) / n;
    for (int i = 0; i < n; ++i) de.col(i) += d_all;
    int count = 0;
    for (int i = 0; i < n; ++i) count += p.remaining[t][i] ? 1 : 0;
    const Eigen::VectorXd d_rem = dctx.col(t).segment(e, e) / count;
    for (int i = 0; i < n; ++i)
      if (p.remaining[t][i]) de.col(i) += d_rem;
    if (t > 0) de.col(p.order.sequence[t - 1]) += dctx.col(t).segment(2 * e, e);
  }
  encoder_.backward(p.enc_tape, de, encoder_grad);
  return p.log_prob;
}

nlohmann::json OrderPolicyNet::to_json() const {
  return {{"kind", "order-policy"},
          {"config", config_.to_json()},
          {"encoder", encoder_.to_json()},
          {"query", query_.to_json()}};
}

OrderPolicyNet OrderPolicyNet::from_json(const nlohmann::json& doc) {
  if (doc.value("kind", "") != "order-policy") throw InvalidInput("not an order checkpoint");
  OrderPolicyNet net(OrderNetConfig::from_json(doc.at("config")));
  nn::DenseNet enc = nn::DenseNet::from_json(doc.at("encoder"));
  nn::DenseNet qry = nn::DenseNet::from_json(doc.at("query"));
  if (enc.layer_sizes() != net.encoder_.layer_sizes() ||
      qry.layer_sizes() != net.query_.layer_sizes())
    throw ShapeMismatch("checkpoint network shape differs from its config");
  net.encoder_ = std::move(enc);
  net.query_ = std::move(qry);
  return net;
}

void OrderPolicyNet::save(const std::filesystem::path& path) const {
  write_json_file(to_json(), path);
}

OrderPolicyNet OrderPolicyNet::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw MissingCheckpoint("order checkpoint not found: " + path.string());
  return from_json(read_json_file(path));
}

double order_cost(const BsInstance& inst, const ProcessingOrder& order) {
  return dp_solve(inst.tasks, order, inst.offer, inst.grid).execution_cost();
}

OrderTrainer::OrderTrainer(OrderPolicyNet& net, std::uint64_t seed)
    : net_(net),
      enc_opt_(net.encoder().param_count(), {net.config().lr}),
      query_opt_(net.query().param_count(), {net.config().lr}),
      rng_(seed) {}

ReinforceReport OrderTrainer::reinforce_step(std::span<const BsInstance> batch,
                                             BaselineKind baseline) {
  if (batch.empty()) throw InvalidInput("empty training batch");
  ReinforceReport rep;
  std::vector<Eigen::MatrixXd> feats;
  std::vector<ProcessingOrder> orders;
  for (const auto& inst : batch) {
    feats.push_back(encode_order_features(inst.tasks, inst.offer, inst.grid, net_.config()));
    OrderRollout s = net_.emit_order(feats.back(), DecodeMode::Sample, &rng_);
    const double cost = order_cost(inst, s.order);
    rep.rewards.push_back(-cost);
    rep.mean_sampled_cost += cost;
    orders.push_back(std::move(s.order));
    if (baseline == BaselineKind::GreedyRollout) {
      const double g = order_cost(inst, net_.emit_order(feats.back(), DecodeMode::Greedy).order);
      rep.baselines.push_back(-g);
      rep.mean_greedy_cost += g;
    }
  }
  const double b = static_cast<double>(batch.size());
  if (baseline == BaselineKind::BatchMean) {
    double mean = 0.0;
    for (double r : rep.rewards) mean += r;
    rep.baselines.assign(batch.size(), mean / b);
    rep.mean_greedy_cost = -mean;
  }
  rep.mean_sampled_cost /= b;
  rep.mean_greedy_cost /= b;

  std::vector<double> eg(net_.encoder().param_count(), 0.0);
  std::vector<double> qg(net_.query().param_count(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double adv = rep.rewards[i] - rep.baselines[i];
    rep.advantages.push_back(adv);
    // Minimizing -adv * log pi: gradient weight is -adv / B.
    const double lp = net_.accumulate_log_prob_grad(feats[i], orders[i], -adv / b, eg, qg);
    rep.loss += -adv * lp / b;
  }
  enc_opt_.step(net_.encoder().params(), eg);
  query_opt_.step(net_.query().params(), qg);
  return rep;
}

RatioStats eval_ratio(const OrderProvider& provider, std::span<const BsInstance> instances,
                      OracleLimits limits) {
  RatioStats st;
  double sum = 0.0;
  for (const auto& inst : instances) {
    const ExecutionPlan best =
        brute_force_best(inst.tasks, inst.offer, inst.grid, limits, PlanFamily::Trimmed);
    const ExecutionPlan mine = solve_bs(inst.tasks, inst.offer, inst.grid, provider);
    const double opt = best.execution_cost();
    const double got = mine.execution_cost();
    double ratio = 1.0;
    if (opt > 0.0) ratio = got / opt;
    else if (got > 0.0) ratio = std::numeric_limits<double>::infinity();
    st.max = std::max(st.max, ratio);
    sum += ratio;
    ++st.count;
  }
  st.mean = st.count ? sum / static_cast<double>(st.count) : 0.0;
  return st;
}

OrderProvider learned_provider(const OrderPolicyNet& net) {
  return [&net](std::span<const OffloadRequest> tasks, const ResourceOffer& offer,
                const SlotGrid& grid) {
    return net.emit_order(encode_order_features(tasks, offer, grid, net.config()),
                          DecodeMode::Greedy)
        .order;
  };
}

OrderProvider guarded_provider(const OrderPolicyNet& net) {
  return [&net](std::span<const OffloadRequest> tasks, const ResourceOffer& offer,
                const SlotGrid& grid) {
    ProcessingOrder fallback = smith_order(tasks);
    if (tasks.size() < 2 || static_cast<int>(tasks.size()) > net.config().max_tasks)
      return fallback;
    ProcessingOrder learned =
        net.emit_order(encode_order_features(tasks, offer, grid, net.config()), DecodeMode::Greedy)
            .order;
    const double a = dp_solve(tasks, learned, offer, grid).execution_cost();
    const double b = dp_solve(tasks, fallback, offer, grid).execution_cost();
    return a <= b ? learned : fallback;
  };
}

OrderTrainConfig OrderTrainConfig::from_json(const nlohmann::json& doc) {
  OrderTrainConfig c;
  if (doc.contains("instances")) c.instances = InstanceParams::from_json(doc["instances"]);
  c.net = OrderNetConfig::from_json(doc.value("net", nlohmann::json::object()));
  c.net.horizon = c.instances.horizon;
  c.steps = doc.value("steps", c.steps);
  c.batch = doc.value("batch", c.batch);
  c.window = doc.value("window", c.window);
  c.seed = doc.value("seed", c.seed);
  if (c.steps < 1 || c.batch < 1 || c.window < 1) throw InvalidInput("bad training budget");
  if (c.instances.max_tasks > c.net.max_tasks)
    throw InvalidInput("instances have more tasks than the network supports");
  return c;
}

nlohmann::json OrderTrainConfig::to_json() const {
  return {{"instances", instances.to_json()},
          {"net", net.to_json()},
          {"steps", steps},
          {"batch", batch},
          {"window", window},
          {"seed", seed}};
}

std::vector<OrderCurvePoint> train_order(OrderPolicyNet& net, const OrderTrainConfig& config) {
  if (net.config().horizon != config.instances.horizon)
    throw ShapeMismatch("network horizon differs from the instance horizon");
  OrderTrainer trainer(net, config.seed * 7 + 1);
  std::mt19937_64 data(config.seed);
  std::vector<OrderCurvePoint> curve;
  std::vector<double> costs;
  std::vector<BsInstance> batch(config.batch);
  for (int s = 0; s < config.steps; ++s) {
    for (auto& inst : batch) inst = random_bs_instance(data, config.instances);
    const ReinforceReport rep = trainer.reinforce_step(batch);
    costs.push_back(rep.mean_greedy_cost);
    curve.push_back({s, rep.mean_greedy_cost, moving_average(costs, config.window).back(),
                     rep.loss});
  }
  return curve;
}

void write_order_curve(const std::filesystem::path& path,
                       const std::vector<OrderCurvePoint>& curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.precision(12);
  out << "step,moving_avg_cost,loss\n";
  for (const auto& p : curve) out << p.step << ',' << p.moving_avg << ',' << p.loss << '\n';
}

}  // namespace cec
