#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "cec/alloc_ddpg.hpp"
#include "cec/errors.hpp"
#include "support.hpp"

using namespace cec;
using cec::testing::make_offer;
using cec::testing::make_task;

namespace {

DdpgConfig small_config(std::uint64_t seed = 1) {
  DdpgConfig c;
  c.num_bs = 2;
  c.horizon = 3;
  c.group_size = 2;
  c.hidden = {16, 16};
  c.batch_size = 8;
  c.seed = seed;
  return c;
}

std::vector<OffloadRequest> tasks(int n) {
  std::vector<OffloadRequest> out;
  for (int i = 0; i < n; ++i) out.push_back(make_task(i + 1, 1e6 * (i + 1), 100, 10));
  return out;
}

Eigen::VectorXd obs_with_tasks(const DdpgConfig& c, int real, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(c.obs_size());
  const int base = c.num_bs * 2 * c.horizon;
  for (int i = 0; i < base; ++i) obs[i] = u(rng);
  for (int i = 0; i < 3 * real; ++i) obs[base + i] = u(rng);
  return obs;
}

// Pins the actor output to `logits` for every input.
void pin_logits(DdpgAgent& agent, const std::vector<double>& logits) {
  auto p = agent.actor().params();
  const std::size_t out = logits.size();
  std::fill(p.end() - static_cast<long>(out * (agent.config().hidden.back() + 1)), p.end(), 0.0);
  std::copy(logits.begin(), logits.end(), p.end() - static_cast<long>(out));
}

}  // namespace

TEST_CASE("grouping examples") {
  const auto seven = tasks(7);
  const auto g = group_tasks(seven, 5);
  REQUIRE(g.size() == 2);
  CHECK(g[0].tasks.size() == 5);
  CHECK(g[1].tasks.size() == 2);  // three dummy positions
  CHECK(g[1].tasks[0].task_id == 6);
  CHECK(group_tasks(tasks(0), 5).empty());
  CHECK(group_tasks(tasks(5), 5).size() == 1);
  CHECK_THROWS_AS(group_tasks(seven, 0), InvalidInput);
}

TEST_CASE("observation layout") {
  DdpgConfig c = small_config();
  c.capacity_scale = 10;
  PriceScale prices;
  const std::vector<ResourceOffer> offers{make_offer(1, {10, 5, 0}, {2, 4, 0}),
                                          make_offer(2, {1, 2, 3}, {1, 1, 1})};
  prices.update(offers);
  CHECK(prices.max_price == 4);
  TaskGroup g{{make_task(1, 20e6, 250, 45)}};
  const auto obs = encode_observation(offers, g, c, prices);
  REQUIRE(obs.size() == c.obs_size());
  CHECK(obs[0] == 1.0);
  CHECK(obs[1] == 0.5);
  CHECK(obs[3] == 0.5);
  CHECK(obs[4] == 1.0);
  CHECK(obs[6] == doctest::Approx(0.1));
  CHECK(obs[12] == 1.0);
  CHECK(obs[13] == 0.5);
  CHECK(obs[14] == 0.5);
  CHECK(obs[15] == 0.0);
  CHECK(real_tasks_in(obs, c) == 1);
  CHECK_THROWS_AS(encode_observation(std::span(offers).first(1), g, c, prices), ShapeMismatch);
}

TEST_CASE("acting examples") {
  DdpgConfig c = small_config();
  DdpgAgent agent(c);
  std::mt19937_64 rng(1);
  // Two blocks of width 3: block 0 prefers BS 1, block 1 prefers BS 2.
  pin_logits(agent, {0, 5, 1, 0, 1, 7});
  const auto full = obs_with_tasks(c, 2, rng);
  auto a = agent.act(full, false);
  CHECK(a.targets == std::vector<int>{1, 2});
  // Dummy blocks decode to Reject whatever the logits say.
  const auto one = obs_with_tasks(c, 1, rng);
  a = agent.act(one, false);
  CHECK(a.targets == std::vector<int>{1, kReject});
  CHECK(a.probs[3] == 1.0);
  a = agent.act(one, true, 3.0);
  CHECK(a.targets[1] == kReject);
}

TEST_CASE("sampling follows a peaked block") {
  DdpgConfig c = small_config();
  c.group_size = 1;
  DdpgAgent agent(c);
  pin_logits(agent, {0, 50, 0});
  std::mt19937_64 rng(3);
  const auto obs = obs_with_tasks(c, 1, rng);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += agent.act(obs, true, 0.0).targets[0] == 1;
  CHECK(hits > 9900);
}

TEST_CASE("policy blocks are distributions") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DdpgAgent agent(small_config(seed));
    const auto& c = agent.config();
    for (int real = 0; real <= c.group_size; ++real) {
      const auto p = agent.policy_probs(obs_with_tasks(c, real, rng));
      for (int j = 0; j < c.group_size; ++j) {
        double s = 0;
        for (int i = 0; i <= c.num_bs; ++i) {
          CHECK(p[j * (c.num_bs + 1) + i] >= 0.0);
          s += p[j * (c.num_bs + 1) + i];
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("one-hot actions") {
  CHECK(one_hot_targets(std::vector<int>{0, 2}, 2) == std::vector<double>{1, 0, 0, 0, 0, 1});
  CHECK_THROWS_AS(one_hot_targets(std::vector<int>{3}, 2), InvalidInput);
}

TEST_CASE("td target examples") {
  std::mt19937_64 rng(1);
  DdpgConfig c = small_config();
  c.gamma = 0.0;
  DdpgAgent zero(c);
  Transition t{obs_with_tasks(c, 2, rng), Eigen::VectorXd::Zero(c.action_size()), 3.5,
               obs_with_tasks(c, 1, rng), false};
  CHECK(zero.td_target(t) == 3.5);

  DdpgAgent agent(small_config());
  t.terminal = true;
  CHECK(agent.td_target(t) == 3.5);
  t.terminal = false;
  const auto p = agent.policy_probs(t.next_obs);  // target nets start equal
  CHECK(agent.td_target(t) ==
        doctest::Approx(3.5 + 0.95 * agent.q_value(t.next_obs, p)).epsilon(1e-12));
}

TEST_CASE("soft update with omega one copies the primary") {
  DdpgConfig c = small_config();
  c.omega = 1.0;
  DdpgAgent agent(c);
  std::mt19937_64 rng(2);
  ReplayBuffer buf(64);
  for (int i = 0; i < 16; ++i)
    buf.push({obs_with_tasks(c, 2, rng), Eigen::VectorXd::Zero(c.action_size()), 1.0,
              obs_with_tasks(c, 2, rng), false});
  agent.train_step(buf, 8);
  const auto a = agent.actor().params();
  const auto ta = agent.target_actor().params();
  CHECK(std::equal(a.begin(), a.end(), ta.begin()));
  const auto q = agent.critic().params();
  const auto tq = agent.target_critic().params();
  CHECK(std::equal(q.begin(), q.end(), tq.begin()));
}

TEST_CASE("targets track slowly") {
  DdpgAgent agent(small_config());
  const auto& c = agent.config();
  std::mt19937_64 rng(2);
  ReplayBuffer buf(64);
  for (int i = 0; i < 16; ++i)
    buf.push({obs_with_tasks(c, 2, rng), Eigen::VectorXd::Zero(c.action_size()), 1.0,
              obs_with_tasks(c, 2, rng), false});
  const std::vector<double> before(agent.target_critic().params().begin(),
                                   agent.target_critic().params().end());
  agent.train_step(buf, 8);
  const auto now = agent.critic().params();
  const auto tgt = agent.target_critic().params();
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(tgt[i] == doctest::Approx(0.01 * now[i] + 0.99 * before[i]).epsilon(1e-12));
}

TEST_CASE("critic fits a zero-reward terminal buffer") {
  DdpgConfig c = small_config();
  c.critic_lr = 1e-2;
  DdpgAgent agent(c);
  std::mt19937_64 rng(4);
  ReplayBuffer buf(100);
  for (int i = 0; i < 32; ++i) {
    const auto obs = obs_with_tasks(c, 2, rng);
    buf.push({obs, Eigen::VectorXd::Zero(c.action_size()), 0.0, obs, true});
  }
  const double first = agent.train_step(buf, 32).critic_loss;
  double last = first;
  for (int i = 0; i < 400; ++i) last = agent.train_step(buf, 32).critic_loss;
  CHECK(last < 1e-4);
  CHECK(last < first);
}

TEST_CASE("training is deterministic and checks the buffer") {
  auto run = [] {
    DdpgAgent agent(small_config(7));
    const auto& c = agent.config();
    std::mt19937_64 rng(9);
    ReplayBuffer buf(100);
    for (int i = 0; i < 20; ++i)
      buf.push({obs_with_tasks(c, 1 + i % 2, rng), Eigen::VectorXd::Zero(c.action_size()),
                0.1 * i, obs_with_tasks(c, 2, rng), i % 5 == 0});
    for (int i = 0; i < 10; ++i) agent.train_step(buf, 8);
    return std::vector<double>(agent.actor().params().begin(), agent.actor().params().end());
  };
  CHECK(run() == run());

  DdpgAgent agent(small_config());
  ReplayBuffer small(10);
  CHECK_THROWS_AS(agent.train_step(small, 4), BufferUnderfull);
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push({Eigen::VectorXd::Constant(1, i), {}, 0.0, {}, false});
  CHECK(buf.size() == 3);
  // Oldest entries are overwritten first.
  CHECK(buf.at(0).obs[0] == 3);
  CHECK(buf.at(1).obs[0] == 4);
  CHECK(buf.at(2).obs[0] == 2);
  CHECK_THROWS_AS(ReplayBuffer(0), InvalidInput);
}

TEST_CASE("replay sampling is uniform") {
  ReplayBuffer buf(100);
  for (int i = 0; i < 100; ++i) buf.push({Eigen::VectorXd::Constant(1, i), {}, 0.0, {}, false});
  std::mt19937_64 rng(11);
  std::vector<int> count(100, 0);
  const int draws = 100000;
  for (int b = 0; b < draws / 100; ++b)
    for (auto i : buf.sample_indices(rng, 100)) ++count[i];
  // Binomial(1e5, 0.01): mean 1000, sd about 31.5.
  const double sd = std::sqrt(draws * 0.01 * 0.99);
  for (int c : count) CHECK(std::abs(c - 1000) < 5 * sd);
}

TEST_CASE("gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    DdpgConfig c = small_config(seed);
    c.hidden = {8, 8};
    DdpgAgent agent(c);
    std::mt19937_64 rng(seed);
    const int b = 4;
    Eigen::MatrixXd s(c.obs_size(), b), x(c.obs_size() + c.action_size(), b);
    std::vector<int> real(b);
    for (int i = 0; i < b; ++i) {
      real[i] = i % (c.group_size + 1);
      s.col(i) = obs_with_tasks(c, real[i], rng);
      x.col(i).head(c.obs_size()) = s.col(i);
      x.col(i).tail(c.action_size()) = Eigen::VectorXd::Random(c.action_size()).cwiseAbs();
    }
    Eigen::RowVectorXd y = Eigen::RowVectorXd::Random(b);

    std::vector<double> cg(agent.critic().param_count(), 0.0);
    agent.critic_loss_grad(x, y, cg);
    std::vector<double> scratch(cg.size());
    const double cerr = testing::max_fd_error(agent.critic().params(), cg, [&] {
      return agent.critic_loss_grad(x, y, scratch);
    });
    CHECK(cerr < 1e-4);

    std::vector<double> ag(agent.actor().param_count(), 0.0);
    agent.actor_loss_grad(s, real, ag);
    std::vector<double> scratch2(ag.size());
    const double aerr = testing::max_fd_error(agent.actor().params(), ag, [&] {
      return agent.actor_loss_grad(s, real, scratch2);
    });
    CHECK(aerr < 1e-4);
  }
}

TEST_CASE("learns a two-armed contextual bandit") {
  // One task, one BS: accepting pays +1 in context A and -1 in context B.
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DdpgConfig c;
    c.num_bs = 1;
    c.horizon = 1;
    c.group_size = 1;
    c.hidden = {16, 16};
    c.gamma = 0.0;
    c.batch_size = 16;
    c.actor_lr = 1e-3;
    c.seed = seed;
    DdpgAgent agent(c);
    Eigen::VectorXd ctx_a(c.obs_size()), ctx_b(c.obs_size());
    ctx_a << 1, 1, 0.5, 0.5, 0.5;
    ctx_b << 1, 1, 0.5, 0.5, -0.5;
    ReplayBuffer buf(1000);
    std::mt19937_64 rng(seed);
    for (int e = 0; e < 500; ++e) {
      const bool a_side = e % 2 == 0;
      const auto& obs = a_side ? ctx_a : ctx_b;
      const auto act = agent.act(obs, true, 1.0 - 0.9 * e / 500.0);
      const double r = act.targets[0] == 1 ? (a_side ? 1.0 : -1.0) : 0.0;
      const auto hot = one_hot_targets(act.targets, 1);
      buf.push({obs, Eigen::Map<const Eigen::VectorXd>(hot.data(), hot.size()), r, obs, true});
      if (buf.size() >= 32) agent.train_step(buf, c.batch_size);
    }
    solved += agent.act(ctx_a, false).targets[0] == 1 && agent.act(ctx_b, false).targets[0] == 0;
  }
  CHECK(solved >= 4);
}

TEST_CASE("stage-one reward") {
  const SlotGrid g{1.0, 3, 0};
  SystemState st;
  st.grid = g;
  st.offers = {make_offer(1, {4, 4, 4}, {1, 3, 1}), make_offer(2, {4, 4, 4}, {1, 3, 1})};
  st.requests = {make_task(1, 4, 100, 10), make_task(2, 4, 100, 10)};
  CHECK(stage1_reward(st, std::vector<int>{kReject, kReject}, smith_provider()) == 0.0);
  const double one = stage1_reward(st, std::vector<int>{1, kReject}, smith_provider());
  CHECK(one == doctest::Approx(96));
  CHECK(one == doctest::Approx(
                   testing::best_single_task_surplus(st.requests[0], st.offers[0], g)));
  const double stacked = stage1_reward(st, std::vector<int>{1, 1}, smith_provider());
  const double split = stage1_reward(st, std::vector<int>{1, 2}, smith_provider());
  CHECK(stacked == doctest::Approx(174));
  CHECK(split == doctest::Approx(192));
  CHECK(split >= stacked);
}

TEST_CASE("checkpoint round trip") {
  DdpgAgent agent(small_config(3));
  agent.prices().max_price = 2.5;
  const auto path = std::filesystem::temp_directory_path() / "cec_ddpg_roundtrip.json";
  agent.save(path);
  const DdpgAgent back = DdpgAgent::load(path);
  std::mt19937_64 rng(1);
  const auto obs = obs_with_tasks(agent.config(), 2, rng);
  CHECK(back.policy_probs(obs) == agent.policy_probs(obs));
  CHECK(back.prices().max_price == 2.5);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(DdpgAgent::load(path), MissingCheckpoint);
  auto doc = agent.to_json();
  doc["kind"] = "order-policy";
  CHECK_THROWS_AS(DdpgAgent::from_json(doc), InvalidInput);
}
