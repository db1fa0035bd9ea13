#include <gtest/gtest.h>

#include <map>
#include <random>

#include "evcs/agents.hpp"

using namespace evcs;

namespace {

Transition transition(double reward, bool done, double tag = 0.0) {
  Transition t;
  t.state = {0.2, 0.5, tag, 0.3};
  t.action = {0.1, -0.4, 0.6};
  t.reward = reward;
  t.next_state = {0.25, 0.5, tag, 0.3};
  t.done = done;
  return t;
}

Batch repeated(const Transition& t, int n) { return to_batch(std::vector<Transition>(static_cast<std::size_t>(n), t)); }

double q_at(nn::Mlp& q, const Transition& t) {
  nn::Matrix sa(kStateDim + kActionDim, 1);
  for (int i = 0; i < kStateDim; ++i) sa(i, 0) = t.state[static_cast<std::size_t>(i)];
  for (int i = 0; i < kActionDim; ++i) sa(kStateDim + i, 0) = t.action[static_cast<std::size_t>(i)];
  return q.forward(sa)(0, 0);
}

// Output layer replaced by a constant so the network ignores its input.
void make_constant(nn::Mlp& net, double value) {
  auto& last = net.layers().back();
  last.weight.setZero();
  last.bias.setConstant(value);
}

SacConfig small_sac() {
  SacConfig c;
  c.hidden = {32, 32};
  c.batch_size = 16;
  return c;
}

Td3Config small_td3() {
  Td3Config c;
  c.hidden = {32, 32};
  c.batch_size = 16;
  return c;
}

}  // namespace

TEST(ReplayBuffer, EvictsOldestFirst) {
  ReplayBuffer<int> buf(3);
  for (int i = 1; i <= 5; ++i) buf.push(i);
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.contents(), (std::vector<int>{3, 4, 5}));
  buf.push(6);
  EXPECT_EQ(buf.contents(), (std::vector<int>{4, 5, 6}));
  EXPECT_THROW(ReplayBuffer<int>(0), std::invalid_argument);
}

TEST(ReplayBuffer, SingletonSampleRepeatsIt) {
  ReplayBuffer<int> buf(10);
  buf.push(7);
  std::mt19937_64 rng(1);
  auto s = buf.sample(50, rng);
  ASSERT_EQ(s.size(), 50u);
  for (int v : s) EXPECT_EQ(v, 7);
}

TEST(ReplayBuffer, SamplingIsUniform) {
  ReplayBuffer<int> buf(10);
  for (int i = 0; i < 10; ++i) buf.push(i);
  std::mt19937_64 rng(2);
  std::map<int, int> counts;
  const int n = 100000;
  for (int v : buf.sample(n, rng)) ++counts[v];
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(counts[i] / static_cast<double>(n), 0.10, 0.01);
}

TEST(ReplayBuffer, EmptySampleThrows) {
  TransitionBuffer buf(4);
  std::mt19937_64 rng(3);
  EXPECT_THROW(buf.sample(1, rng), EmptyBuffer);
}

TEST(Batch, LayoutAndDoneMask) {
  auto b = to_batch({transition(2.0, false, 0.1), transition(-1.0, true, 0.9)});
  EXPECT_EQ(b.states.rows(), kStateDim);
  EXPECT_EQ(b.actions.rows(), kActionDim);
  EXPECT_EQ(b.states(2, 1), 0.9);
  EXPECT_EQ(b.rewards(0), 2.0);
  EXPECT_EQ(b.not_done(0), 1.0);
  EXPECT_EQ(b.not_done(1), 0.0);
}

TEST(Targets, BellmanExample) {
  nn::Vector r(2), nd(2);
  r << 1.0, 2.0;
  nd << 1.0, 0.0;
  nn::Matrix v(1, 2);
  v << 10.0, 10.0;
  auto y = bellman_targets(r, nd, v, 0.9, 0.5);
  EXPECT_DOUBLE_EQ(y(0), 0.5 + 9.0);
  EXPECT_DOUBLE_EQ(y(1), 1.0);
}

TEST(Targets, ValueTargetUsesSmallerCritic) {
  nn::Matrix q1(1, 3), q2(1, 3);
  q1 << 1.0, 5.0, -2.0;
  q2 << 3.0, 4.0, -7.0;
  nn::Vector logp(3);
  logp << 0.5, -1.0, 0.0;
  auto y = sac_value_targets(q1, q2, logp, 0.2);
  EXPECT_DOUBLE_EQ(y(0), 1.0 - 0.1);
  EXPECT_DOUBLE_EQ(y(1), 4.0 + 0.2);
  EXPECT_DOUBLE_EQ(y(2), -7.0);
}

TEST(Sac, TerminalFixedPoint) {
  SacAgent agent(small_sac(), 5);
  auto t = transition(1.0, true);
  auto b = repeated(t, 16);
  for (int i = 0; i < 3000; ++i) agent.update(b);
  EXPECT_NEAR(q_at(agent.q1(), t), 1.0, 1e-2);
  EXPECT_NEAR(q_at(agent.q2(), t), 1.0, 1e-2);
  EXPECT_EQ(agent.updates(), 3000);
}

TEST(Sac, RewardScaleScalesTheFixedPoint) {
  auto cfg = small_sac();
  cfg.reward_scale = 0.01;
  SacAgent agent(cfg, 6);
  auto t = transition(-100.0, true);
  auto b = repeated(t, 16);
  for (int i = 0; i < 3000; ++i) agent.update(b);
  EXPECT_NEAR(q_at(agent.q1(), t), -1.0, 1e-2);
}

TEST(Sac, ValueTracksSmallerCritic) {
  auto cfg = small_sac();
  cfg.lr_critic = 0.0;
  cfg.lr_actor = 0.0;
  cfg.lr_value = 1e-2;
  cfg.entropy_coef = 0.0;
  SacAgent agent(cfg, 7);
  make_constant(agent.q1(), 10.0);
  make_constant(agent.q2(), -3.0);
  auto b = repeated(transition(0.0, false), 16);
  for (int i = 0; i < 1000; ++i) agent.update(b);
  nn::Vector s = b.states.col(0);
  EXPECT_NEAR(agent.value().forward(s)(0), -3.0, 1e-3);
}

TEST(Sac, RandomUpdatesStayFinite) {
  SacAgent agent(small_sac(), 8);
  TransitionBuffer buf(500);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    Transition t;
    for (auto& v : t.state) v = 0.5 * (u(rng) + 1.0);
    for (auto& v : t.action) v = u(rng);
    for (auto& v : t.next_state) v = 0.5 * (u(rng) + 1.0);
    t.reward = 5.0 * u(rng);
    t.done = u(rng) > 0.9;
    buf.push(t);
  }
  for (int i = 0; i < 1000; ++i) {
    auto l = agent.update(buf);
    ASSERT_TRUE(std::isfinite(l.critic1 + l.critic2 + l.value + l.actor));
  }
  EXPECT_TRUE(agent.actor().all_finite());
  EXPECT_TRUE(agent.value_target().all_finite());
}

TEST(Sac, ZeroEntropyCoefficientStillLearns) {
  auto cfg = small_sac();
  cfg.entropy_coef = 0.0;
  SacAgent agent(cfg, 10);
  auto t = transition(2.0, true);
  auto b = repeated(t, 16);
  for (int i = 0; i < 3000; ++i) agent.update(b);
  EXPECT_NEAR(q_at(agent.q1(), t), 2.0, 2e-2);
}

TEST(Sac, ActorClimbsCriticGradient) {
  // Critics fixed at Q = w . a with w = (1, -1, 0.5): the greedy action
  // should head for (+1, -1, +1).
  auto cfg = small_sac();
  cfg.lr_critic = 0.0;
  cfg.lr_actor = 1e-3;
  cfg.entropy_coef = 0.01;
  SacAgent agent(cfg, 11);
  // One rectified unit carries w . a + 10 (always positive) through to the output.
  for (nn::Mlp* q : {&agent.q1(), &agent.q2()}) {
    auto& l = q->layers();
    for (auto& layer : l) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
    l[0].weight.row(0) << 0, 0, 0, 0, 1.0, -1.0, 0.5;
    l[0].bias(0) = 10.0;
    l[1].weight(0, 0) = 1.0;
    l[2].weight(0, 0) = 1.0;
    l[2].bias(0) = -10.0;
  }
  auto b = repeated(transition(0.0, false), 16);
  for (int i = 0; i < 1500; ++i) agent.update(b);
  auto a = agent.act(transition(0.0, false).state, false);
  EXPECT_GT(a[0], 0.9);
  EXPECT_LT(a[1], -0.9);
  EXPECT_GT(a[2], 0.9);
}

TEST(Sac, ActIsSeededAndBounded) {
  SacAgent a(small_sac(), 12), b(small_sac(), 12);
  Observation obs{0.1, 0.4, 0.7, 0.2};
  for (int i = 0; i < 100; ++i) {
    auto x = a.act(obs, true);
    auto y = b.act(obs, true);
    EXPECT_EQ(x, y);
    for (double v : x) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
  EXPECT_EQ(a.act(obs, false), a.act(obs, false));
}

TEST(Sac, ExploreCollapsesToMeanAtLogStdFloor) {
  SacAgent agent(small_sac(), 13);
  auto& last = agent.actor().layers().back();
  last.weight.bottomRows(kActionDim).setZero();
  last.bias.tail(kActionDim).setConstant(-40.0);
  Observation obs{0.3, 0.3, 0.3, 0.3};
  auto mean = agent.act(obs, false);
  auto sample = agent.act(obs, true);
  for (int i = 0; i < kActionDim; ++i) EXPECT_NEAR(sample[static_cast<std::size_t>(i)], mean[static_cast<std::size_t>(i)], 1e-7);
}

TEST(Sac, ConfigValidation) {
  auto c = small_sac();
  c.discount = 1.5;
  EXPECT_THROW(SacAgent(c, 1), std::invalid_argument);
  c = small_sac();
  c.tau = 0.0;
  EXPECT_THROW(SacAgent(c, 1), std::invalid_argument);
  c = small_sac();
  c.entropy_coef = -0.1;
  EXPECT_THROW(SacAgent(c, 1), std::invalid_argument);
}

TEST(Td3, PolicyDelayCounter) {
  auto cfg = small_td3();
  cfg.policy_delay = 3;
  Td3Agent agent(cfg, 14);
  auto b = repeated(transition(1.0, true), 16);
  int actor_steps = 0;
  for (int i = 0; i < 9; ++i)
    if (agent.update(b).actor) ++actor_steps;
  EXPECT_EQ(actor_steps, 3);
  EXPECT_EQ(agent.critic_updates(), 9);
  EXPECT_EQ(agent.actor_updates(), 3);
}

TEST(Td3, ZeroNoiseClipGivesTargetPolicyMean) {
  auto cfg = small_td3();
  cfg.noise_clip = 0.0;
  Td3Agent agent(cfg, 15);
  nn::Matrix s = repeated(transition(0.0, false), 4).next_states;
  nn::Matrix expected = nn::squash(agent.actor_target().forward(s));
  EXPECT_EQ(agent.target_actions(s), expected);
}

TEST(Td3, TargetNoiseIsClipped) {
  auto cfg = small_td3();
  cfg.target_noise = 10.0;
  cfg.noise_clip = 0.05;
  Td3Agent agent(cfg, 16);
  nn::Matrix s = repeated(transition(0.0, false), 200).next_states;
  nn::Matrix mean = nn::squash(agent.actor_target().forward(s));
  nn::Matrix a = agent.target_actions(s);
  EXPECT_LE((a - mean).cwiseAbs().maxCoeff(), 0.05 + 1e-15);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Td3, CriticTargetsUseSmallerTargetCritic) {
  Td3Agent agent(small_td3(), 17);
  make_constant(agent.q1_target(), 4.0);
  make_constant(agent.q2_target(), 1.5);
  auto b = to_batch({transition(1.0, false), transition(1.0, true)});
  auto y = agent.critic_targets(b, b.actions);
  EXPECT_DOUBLE_EQ(y(0), 1.0 + 0.99 * 1.5);
  EXPECT_DOUBLE_EQ(y(1), 1.0);
}

TEST(Td3, TerminalFixedPoint) {
  Td3Agent agent(small_td3(), 18);
  auto t = transition(1.0, true);
  auto b = repeated(t, 16);
  for (int i = 0; i < 3000; ++i) agent.update(b);
  EXPECT_NEAR(q_at(agent.q1(), t), 1.0, 1e-2);
}

TEST(Td3, ExplorationStaysInRange) {
  auto cfg = small_td3();
  cfg.exploration_noise = 5.0;
  Td3Agent agent(cfg, 19);
  for (int i = 0; i < 200; ++i)
    for (double v : agent.act({0.5, 0.5, 0.5, 0.5}, true)) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
}

TEST(Actions, SquashedToUnitInterval) {
  Action a = to_env_action({-1.0, 0.0, 1.0});
  EXPECT_EQ(a.a1, 0.0);
  EXPECT_EQ(a.a2, 0.5);
  EXPECT_EQ(a.a3, 1.0);
}

TEST(RuleBased, Examples) {
  auto cfg = default_env_config();
  // Weekday peak with EV load and charge left: discharge only.
  Action a = rule_based_policy({1, 16, 0.5, 0.21, 50.0}, cfg);
  EXPECT_EQ(a.a1, 0.0);
  EXPECT_EQ(a.a2, 1.0);
  EXPECT_EQ(a.a3, 0.0);
  // Cheap hour without load: idle.
  a = rule_based_policy({1, 3, 0.5, 0.11, 0.0}, cfg);
  EXPECT_EQ(a.a1, 0.0);
  EXPECT_EQ(a.a2, 0.0);
  EXPECT_EQ(a.a3, 0.0);
  // Cheap hour with load: charge and serve from the grid.
  a = rule_based_policy({1, 10, 0.5, 0.11, 20.0}, cfg);
  EXPECT_EQ(a.a1, 1.0);
  EXPECT_EQ(a.a3, 1.0);
  // Peak with an empty battery: serve from the grid.
  a = rule_based_policy({1, 16, cfg.scenario.soc_min, 0.21, 50.0}, cfg);
  EXPECT_EQ(a.a1, 0.0);
  EXPECT_EQ(a.a2, 0.0);
  EXPECT_EQ(a.a3, 1.0);
  // Cheap hour, full battery, load present.
  a = rule_based_policy({1, 10, cfg.scenario.soc_max, 0.11, 20.0}, cfg);
  EXPECT_EQ(a.a1, 0.0);
  EXPECT_EQ(a.a3, 1.0);
}

TEST(RuleBased, MidPriceWithoutLoadIsIdle) {
  auto cfg = default_env_config();
  for (int t = 0; t < 24; ++t) cfg.schedule.weekday_usd_per_kwh[static_cast<std::size_t>(t)] = 0.05 + 0.01 * t;
  double mid = cfg.schedule.price_at(1, 12);
  Action a = rule_based_policy({1, 12, 0.5, mid, 0.0}, cfg);
  EXPECT_EQ(a.a1, 0.0);
  EXPECT_EQ(a.a2, 0.0);
  EXPECT_EQ(a.a3, 0.0);
}

TEST(Train, ZeroEpisodesIsEmpty) {
  auto cfg = default_env_config();
  SacAgent agent(small_sac(), 20);
  TrainOptions opt;
  opt.episodes = 0;
  EXPECT_TRUE(train(cfg, agent, opt, 1).empty());
}

TEST(Train, SameSeedSameLog) {
  auto cfg = default_env_config();
  cfg.horizon_days = 3;
  TrainOptions opt;
  opt.episodes = 3;
  opt.calendar_days = 3;
  opt.warmup_transitions = 30;
  auto run = [&] {
    SacAgent agent(small_sac(), 21);
    return train(cfg, agent, opt, 99);
  };
  auto a = run(), b = run();
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].day, b[i].day);
    EXPECT_EQ(a[i].episode_return, b[i].episode_return);
    EXPECT_EQ(a[i].operational_cost_usd, b[i].operational_cost_usd);
  }
  EXPECT_EQ(a.back().buffer_size, 72u);
  EXPECT_EQ(a[2].day, 2);
}

TEST(Train, Td3RunsAndCheckpointHookFires) {
  auto cfg = default_env_config();
  cfg.horizon_days = 2;
  TrainOptions opt;
  opt.episodes = 4;
  opt.calendar_days = 2;
  opt.warmup_transitions = 24;
  opt.checkpoint_every = 2;
  std::vector<int> hits;
  opt.on_checkpoint = [&](int ep) { hits.push_back(ep); };
  Td3Agent agent(small_td3(), 22);
  auto log = train(cfg, agent, opt, 5);
  EXPECT_EQ(hits, (std::vector<int>{1, 3}));
  EXPECT_EQ(log[2].day, 0);  // calendar wraps
  EXPECT_GT(agent.critic_updates(), 0);
}
