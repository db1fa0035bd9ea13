#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "evcs/diffnet.hpp"
#include "evcs/env.hpp"

namespace evcs {

inline constexpr int kStateDim = 4;
inline constexpr int kActionDim = 3;

using Observation = std::array<double, kStateDim>;
// Agent-side action in (-1, 1)^3; the environment sees (a + 1) / 2.
using SquashedAction = std::array<double, kActionDim>;

inline Action to_env_action(const SquashedAction& a) {
  auto unit = [](double x) { return std::clamp(0.5 * (x + 1.0), 0.0, 1.0); };
  return {unit(a[0]), unit(a[1]), unit(a[2])};
}

struct Transition {
  Observation state{};
  SquashedAction action{};
  double reward = 0.0;
  Observation next_state{};
  bool done = false;
};

class EmptyBuffer : public std::runtime_error {
 public:
  EmptyBuffer() : std::runtime_error("sample from an empty replay buffer") {}
};

// Fixed-capacity ring; once full, each push overwrites the oldest record.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
      return;
    }
    items_[next_] = std::move(item);
    next_ = (next_ + 1) % capacity_;
  }

  // Oldest-first view of the contents.
  std::vector<T> contents() const {
    std::vector<T> out;
    out.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) out.push_back(items_[(next_ + i) % items_.size()]);
    return out;
  }

  // Uniform with replacement.
  template <class Rng>
  std::vector<T> sample(std::size_t batch_size, Rng& rng) const {
    if (items_.empty()) throw EmptyBuffer();
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<T> out;
    out.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) out.push_back(items_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<T> items_;
};

using TransitionBuffer = ReplayBuffer<Transition>;

struct Batch {
  nn::Matrix states;       // 4 x B
  nn::Matrix actions;      // 3 x B
  nn::Vector rewards;      // B
  nn::Matrix next_states;  // 4 x B
  nn::Vector not_done;     // B
};

inline Batch to_batch(const std::vector<Transition>& items) {
  const auto n = static_cast<Eigen::Index>(items.size());
  Batch b{nn::Matrix(kStateDim, n), nn::Matrix(kActionDim, n), nn::Vector(n), nn::Matrix(kStateDim, n),
          nn::Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& t = items[static_cast<std::size_t>(j)];
    for (int i = 0; i < kStateDim; ++i) {
      b.states(i, j) = t.state[static_cast<std::size_t>(i)];
      b.next_states(i, j) = t.next_state[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < kActionDim; ++i) b.actions(i, j) = t.action[static_cast<std::size_t>(i)];
    b.rewards(j) = t.reward;
    b.not_done(j) = t.done ? 0.0 : 1.0;
  }
  return b;
}

inline nn::Matrix stack(const nn::Matrix& top, const nn::Matrix& bottom) {
  nn::Matrix m(top.rows() + bottom.rows(), top.cols());
  m << top, bottom;
  return m;
}

// Critic loss 0.5 * mean((q - y)^2).
inline std::pair<double, nn::Matrix> mse_loss(const nn::Matrix& q, const nn::Vector& target) {
  const double n = static_cast<double>(q.cols());
  nn::Matrix diff = q - target.transpose();
  return {0.5 * diff.squaredNorm() / n, diff / n};
}

inline void require_finite(const nn::Mlp& net, const char* name) {
  if (!net.all_finite()) throw std::runtime_error(std::string("non-finite parameters in ") + name);
}

// ---------------------------------------------------------------------------
// Soft actor-critic with separate value and target-value networks.

struct SacConfig {
  double discount = 0.99;
  double tau = 0.005;
  double entropy_coef = 0.2;
  int batch_size = 128;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  double lr_value = 3e-4;
  int updates_per_step = 1;
  int episodes = 300;
  int warmup_transitions = 1000;
  std::size_t buffer_capacity = 100000;
  std::vector<int> hidden{64, 64};
  // Multiplies environment rewards before they enter the critic targets.
  double reward_scale = 1.0;
  double log_std_min = -20.0;
  double log_std_max = 2.0;

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("sac: " + what); };
    if (!(discount > 0 && discount <= 1)) fail("discount must lie in (0, 1]");
    if (!(tau > 0 && tau <= 1)) fail("tau must lie in (0, 1]");
    if (!(entropy_coef >= 0)) fail("entropy_coef must be non-negative");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (updates_per_step < 0) fail("updates_per_step must be >= 0");
    if (episodes < 0) fail("episodes must be >= 0");
    if (warmup_transitions < 0) fail("warmup_transitions must be >= 0");
    if (buffer_capacity == 0) fail("buffer_capacity must be positive");
    if (!(lr_actor >= 0 && lr_critic >= 0 && lr_value >= 0)) fail("learning rates must be non-negative");
    if (!(log_std_min < log_std_max)) fail("log_std_min must be below log_std_max");
  }
};

struct SacLosses {
  double critic1 = 0.0;
  double critic2 = 0.0;
  double value = 0.0;
  double actor = 0.0;
  double mean_log_prob = 0.0;
};

// Regression target for the value network: the smaller critic estimate minus
// the entropy-weighted log-probability.
inline nn::Vector sac_value_targets(const nn::Matrix& q1, const nn::Matrix& q2, const nn::Vector& log_prob,
                                    double entropy_coef) {
  nn::Vector y(q1.cols());
  for (Eigen::Index j = 0; j < q1.cols(); ++j) y(j) = std::min(q1(0, j), q2(0, j)) - entropy_coef * log_prob(j);
  return y;
}

inline nn::Vector bellman_targets(const nn::Vector& rewards, const nn::Vector& not_done, const nn::Matrix& next_value,
                                  double discount, double reward_scale) {
  return reward_scale * rewards + discount * not_done.cwiseProduct(next_value.row(0).transpose());
}

class SacAgent {
 public:
  SacAgent(SacConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(make_stream(seed, 0x73616321u)) {
    cfg_.validate();
    head_ = {kActionDim, cfg_.log_std_min, cfg_.log_std_max};
    actor_ = nn::Mlp(sizes(kStateDim, 2 * kActionDim), rng_);
    q1_ = nn::Mlp(sizes(kStateDim + kActionDim, 1), rng_);
    q2_ = nn::Mlp(sizes(kStateDim + kActionDim, 1), rng_);
    value_ = nn::Mlp(sizes(kStateDim, 1), rng_);
    value_target_ = value_;
    actor_opt_ = nn::Adam(actor_, {cfg_.lr_actor});
    q1_opt_ = nn::Adam(q1_, {cfg_.lr_critic});
    q2_opt_ = nn::Adam(q2_, {cfg_.lr_critic});
    value_opt_ = nn::Adam(value_, {cfg_.lr_value});
  }

  const SacConfig& config() const { return cfg_; }
  const nn::PolicyHead& head() const { return head_; }
  nn::Mlp& actor() { return actor_; }
  nn::Mlp& q1() { return q1_; }
  nn::Mlp& q2() { return q2_; }
  nn::Mlp& value() { return value_; }
  nn::Mlp& value_target() { return value_target_; }
  const nn::Mlp& actor() const { return actor_; }

  // explore: squashed Gaussian sample; otherwise the squashed mean.
  SquashedAction act(const Observation& obs, bool explore) {
    nn::Matrix x = Eigen::Map<const nn::Vector>(obs.data(), kStateDim);
    nn::Matrix out = actor_.forward(x);
    nn::Matrix a = explore ? nn::policy_sample(head_, out, rng_).action : nn::policy_mean_action(head_, out);
    return {a(0, 0), a(1, 0), a(2, 0)};
  }

  template <class Buffer>
  SacLosses update(const Buffer& buffer) {
    return update(to_batch(buffer.sample(static_cast<std::size_t>(cfg_.batch_size), rng_)));
  }

  SacLosses update(const Batch& b) {
    SacLosses losses;
    const double n = static_cast<double>(b.states.cols());
    nn::Matrix sa = stack(b.states, b.actions);

    // Critics regress onto r + discount * V_target(s').
    nn::Vector y = bellman_targets(b.rewards, b.not_done, value_target_.forward(b.next_states), cfg_.discount,
                                   cfg_.reward_scale);
    auto fit_critic = [&](nn::Mlp& q, nn::Adam& opt) {
      auto [loss, grads] = nn::loss_gradient(q, sa, [&](const nn::Matrix& out) { return mse_loss(out, y); });
      opt.step(q, grads);
      return loss;
    };
    losses.critic1 = fit_critic(q1_, q1_opt_);
    losses.critic2 = fit_critic(q2_, q2_opt_);

    // Fresh policy samples at s.
    nn::Tape actor_tape;
    nn::Matrix head_out = actor_.forward(b.states, actor_tape);
    nn::PolicySample ps = nn::policy_sample(head_, head_out, rng_);
    nn::Matrix sa_new = stack(b.states, ps.action);
    nn::Tape t1, t2;
    nn::Matrix q1v = q1_.forward(sa_new, t1);
    nn::Matrix q2v = q2_.forward(sa_new, t2);
    losses.mean_log_prob = ps.log_prob.mean();

    // Value network regresses onto min(Q1, Q2) - alpha * log pi.
    nn::Vector yv = sac_value_targets(q1v, q2v, ps.log_prob, cfg_.entropy_coef);
    {
      auto [loss, grads] = nn::loss_gradient(value_, b.states, [&](const nn::Matrix& out) { return mse_loss(out, yv); });
      value_opt_.step(value_, grads);
      losses.value = loss;
    }

    // Actor minimizes alpha * log pi - min(Q1, Q2), reparameterized.
    nn::Matrix pick1 = nn::Matrix::Zero(1, b.states.cols());
    nn::Matrix pick2 = nn::Matrix::Zero(1, b.states.cols());
    double actor_loss = 0.0;
    for (Eigen::Index j = 0; j < b.states.cols(); ++j) {
      bool first = q1v(0, j) <= q2v(0, j);
      (first ? pick1 : pick2)(0, j) = -1.0 / n;
      actor_loss += cfg_.entropy_coef * ps.log_prob(j) - std::min(q1v(0, j), q2v(0, j));
    }
    losses.actor = actor_loss / n;
    nn::Matrix din1, din2;
    q1_.backward(t1, pick1, &din1);
    q2_.backward(t2, pick2, &din2);
    nn::Matrix action_grad = (din1 + din2).bottomRows(kActionDim);
    nn::Vector logp_grad = nn::Vector::Constant(b.states.cols(), cfg_.entropy_coef / n);
    nn::Matrix head_grad = nn::policy_backward(head_, ps, action_grad, logp_grad);
    actor_opt_.step(actor_, actor_.backward(actor_tape, head_grad));

    nn::polyak_update(value_target_, value_, cfg_.tau);

    require_finite(q1_, "critic 1");
    require_finite(q2_, "critic 2");
    require_finite(value_, "value network");
    require_finite(actor_, "actor");
    for (double v : {losses.critic1, losses.critic2, losses.value, losses.actor})
      if (!std::isfinite(v)) throw std::runtime_error("non-finite SAC loss");
    ++updates_;
    return losses;
  }

  long updates() const { return updates_; }

 private:
  std::vector<int> sizes(int in, int out) const {
    std::vector<int> s{in};
    s.insert(s.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    s.push_back(out);
    return s;
  }

  SacConfig cfg_;
  std::mt19937_64 rng_;
  nn::PolicyHead head_;
  nn::Mlp actor_, q1_, q2_, value_, value_target_;
  nn::Adam actor_opt_, q1_opt_, q2_opt_, value_opt_;
  long updates_ = 0;
};

// ---------------------------------------------------------------------------
// Twin delayed deterministic policy gradient baseline.

struct Td3Config {
  double discount = 0.99;
  double tau = 0.005;
  int batch_size = 128;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  int updates_per_step = 1;
  int episodes = 300;
  int warmup_transitions = 1000;
  std::size_t buffer_capacity = 100000;
  std::vector<int> hidden{64, 64};
  double reward_scale = 1.0;
  double target_noise = 0.2;
  double noise_clip = 0.5;
  int policy_delay = 2;
  double exploration_noise = 0.1;

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("td3: " + what); };
    if (!(discount > 0 && discount <= 1)) fail("discount must lie in (0, 1]");
    if (!(tau > 0 && tau <= 1)) fail("tau must lie in (0, 1]");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (policy_delay < 1) fail("policy_delay must be >= 1");
    if (updates_per_step < 0) fail("updates_per_step must be >= 0");
    if (episodes < 0) fail("episodes must be >= 0");
    if (warmup_transitions < 0) fail("warmup_transitions must be >= 0");
    if (buffer_capacity == 0) fail("buffer_capacity must be positive");
    if (!(target_noise >= 0 && noise_clip >= 0 && exploration_noise >= 0)) fail("noise scales must be >= 0");
  }
};

struct Td3Losses {
  double critic1 = 0.0;
  double critic2 = 0.0;
  std::optional<double> actor;
};

class Td3Agent {
 public:
  Td3Agent(Td3Config cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(make_stream(seed, 0x74643321u)) {
    cfg_.validate();
    actor_ = nn::Mlp(sizes(kStateDim, kActionDim), rng_);
    q1_ = nn::Mlp(sizes(kStateDim + kActionDim, 1), rng_);
    q2_ = nn::Mlp(sizes(kStateDim + kActionDim, 1), rng_);
    actor_target_ = actor_;
    q1_target_ = q1_;
    q2_target_ = q2_;
    actor_opt_ = nn::Adam(actor_, {cfg_.lr_actor});
    q1_opt_ = nn::Adam(q1_, {cfg_.lr_critic});
    q2_opt_ = nn::Adam(q2_, {cfg_.lr_critic});
  }

  const Td3Config& config() const { return cfg_; }
  nn::Mlp& actor() { return actor_; }
  const nn::Mlp& actor() const { return actor_; }
  nn::Mlp& actor_target() { return actor_target_; }
  nn::Mlp& q1() { return q1_; }
  nn::Mlp& q2() { return q2_; }
  nn::Mlp& q1_target() { return q1_target_; }
  nn::Mlp& q2_target() { return q2_target_; }

  SquashedAction act(const Observation& obs, bool explore) {
    nn::Matrix x = Eigen::Map<const nn::Vector>(obs.data(), kStateDim);
    nn::Matrix a = nn::squash(actor_.forward(x));
    SquashedAction out{a(0, 0), a(1, 0), a(2, 0)};
    if (explore) {
      std::normal_distribution<double> noise(0.0, cfg_.exploration_noise);
      for (auto& v : out) v = std::clamp(v + noise(rng_), -nn::kSquashLimit, nn::kSquashLimit);
    }
    return out;
  }

  // Target policy action at s' with clipped Gaussian smoothing noise.
  nn::Matrix target_actions(const nn::Matrix& next_states) {
    nn::Matrix a = nn::squash(actor_target_.forward(next_states));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double eps = std::clamp(cfg_.target_noise * normal(rng_), -cfg_.noise_clip, cfg_.noise_clip);
        a(i, j) = std::clamp(a(i, j) + eps, -1.0, 1.0);
      }
    return a;
  }

  // r + discount * min(Q1_target, Q2_target)(s', a').
  nn::Vector critic_targets(const Batch& b, const nn::Matrix& next_actions) const {
    nn::Matrix sa2 = stack(b.next_states, next_actions);
    nn::Matrix qa = q1_target_.forward(sa2);
    nn::Matrix qb = q2_target_.forward(sa2);
    return bellman_targets(b.rewards, b.not_done, qa.cwiseMin(qb), cfg_.discount, cfg_.reward_scale);
  }

  template <class Buffer>
  Td3Losses update(const Buffer& buffer) {
    return update(to_batch(buffer.sample(static_cast<std::size_t>(cfg_.batch_size), rng_)));
  }

  Td3Losses update(const Batch& b) {
    Td3Losses losses;
    nn::Vector y = critic_targets(b, target_actions(b.next_states));
    nn::Matrix sa = stack(b.states, b.actions);
    auto fit_critic = [&](nn::Mlp& q, nn::Adam& opt) {
      auto [loss, grads] = nn::loss_gradient(q, sa, [&](const nn::Matrix& out) { return mse_loss(out, y); });
      opt.step(q, grads);
      return loss;
    };
    losses.critic1 = fit_critic(q1_, q1_opt_);
    losses.critic2 = fit_critic(q2_, q2_opt_);
    ++critic_updates_;

    if (critic_updates_ % cfg_.policy_delay == 0) {
      const double n = static_cast<double>(b.states.cols());
      nn::Tape actor_tape, qt;
      nn::Matrix pre = actor_.forward(b.states, actor_tape);
      nn::Matrix a = nn::squash(pre);
      nn::Matrix q = q1_.forward(stack(b.states, a), qt);
      losses.actor = -q.mean();
      nn::Matrix din;
      q1_.backward(qt, nn::Matrix::Constant(1, b.states.cols(), -1.0 / n), &din);
      nn::Matrix dpre = din.bottomRows(kActionDim).cwiseProduct((1.0 - a.array().square()).matrix());
      actor_opt_.step(actor_, actor_.backward(actor_tape, dpre));
      ++actor_updates_;
      nn::polyak_update(actor_target_, actor_, cfg_.tau);
      nn::polyak_update(q1_target_, q1_, cfg_.tau);
      nn::polyak_update(q2_target_, q2_, cfg_.tau);
    }

    require_finite(q1_, "critic 1");
    require_finite(q2_, "critic 2");
    require_finite(actor_, "actor");
    if (!std::isfinite(losses.critic1) || !std::isfinite(losses.critic2) || (losses.actor && !std::isfinite(*losses.actor)))
      throw std::runtime_error("non-finite TD3 loss");
    return losses;
  }

  long critic_updates() const { return critic_updates_; }
  long actor_updates() const { return actor_updates_; }

 private:
  std::vector<int> sizes(int in, int out) const {
    std::vector<int> s{in};
    s.insert(s.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    s.push_back(out);
    return s;
  }

  Td3Config cfg_;
  std::mt19937_64 rng_;
  nn::Mlp actor_, actor_target_, q1_, q2_, q1_target_, q2_target_;
  nn::Adam actor_opt_, q1_opt_, q2_opt_;
  long critic_updates_ = 0;
  long actor_updates_ = 0;
};

// ---------------------------------------------------------------------------
// Baselines and policy plumbing.

// A deterministic decision rule over the raw environment state.
using Policy = std::function<Action(const EnvState&, const Observation&)>;

// Idle without EV demand. Otherwise charge at full rate in the cheapest
// quartile of the day's prices, discharge to the EVs inside the peak window,
// and serve the remaining EV load from the grid.
inline Action rule_based_policy(const EnvState& s, const EnvConfig& cfg) {
  const auto& spec = cfg.scenario;
  std::vector<double> prices = cfg.schedule.day_prices(s.day_index);
  std::sort(prices.begin(), prices.end());
  double quartile = prices[static_cast<std::size_t>(0.25 * static_cast<double>(prices.size() - 1))];
  bool has_load = s.ev_load_kw > 0.0;

  Action a;
  if (cfg.schedule.is_peak(s.day_index, s.t) && has_load && s.soc > spec.soc_min) {
    a.a2 = 1.0;
    return a;
  }
  if (!has_load) return a;
  if (s.price <= quartile && s.soc < spec.soc_max) a.a1 = 1.0;
  a.a3 = 1.0;
  return a;
}

inline Policy rule_policy(const EnvConfig& cfg) {
  return [cfg](const EnvState& s, const Observation&) { return rule_based_policy(s, cfg); };
}

inline Policy random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(make_stream(seed, 0x726e6421u));
  return [rng](const EnvState&, const Observation&) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double a1 = u(*rng), a2 = u(*rng), a3 = u(*rng);
    return Action{a1, a2, a3};
  };
}

// Deterministic (mean) action of a trained actor network.
inline Policy sac_greedy_policy(nn::Mlp actor) {
  return [actor = std::move(actor)](const EnvState&, const Observation& obs) {
    nn::Matrix x = Eigen::Map<const nn::Vector>(obs.data(), kStateDim);
    nn::Matrix a = nn::squash(actor.forward(x).topRows(kActionDim));
    return to_env_action({a(0, 0), a(1, 0), a(2, 0)});
  };
}

inline Policy td3_greedy_policy(nn::Mlp actor) {
  return [actor = std::move(actor)](const EnvState&, const Observation& obs) {
    nn::Matrix x = Eigen::Map<const nn::Vector>(obs.data(), kStateDim);
    nn::Matrix a = nn::squash(actor.forward(x));
    return to_env_action({a(0, 0), a(1, 0), a(2, 0)});
  };
}

// ---------------------------------------------------------------------------
// Training loop shared by SAC and TD3.

struct TrainLogRow {
  int episode = 0;
  int day = 0;
  double episode_return = 0.0;
  double operational_cost_usd = 0.0;
  int soc_violations = 0;
  std::size_t buffer_size = 0;
};

struct TrainOptions {
  int episodes = 300;
  // Days in the training calendar; episodes walk it cyclically.
  int calendar_days = 365;
  int first_day = 0;
  int warmup_transitions = 1000;
  int updates_per_step = 1;
  std::size_t buffer_capacity = 100000;
  int checkpoint_every = 0;
  std::function<void(int episode)> on_checkpoint;
  // Fixed load profile for every episode (deterministic instances).
  std::optional<LoadProfile> fixed_profile;
};

template <class Agent>
std::vector<TrainLogRow> train(const EnvConfig& env_cfg, Agent& agent, const TrainOptions& opt, std::uint64_t seed) {
  env_cfg.validate();
  if (opt.episodes < 0 || opt.calendar_days <= 0) throw std::invalid_argument("train: bad episode/calendar counts");
  Environment env(env_cfg, seed);
  TransitionBuffer buffer(opt.buffer_capacity);
  auto warmup_rng = make_stream(seed, 0x77726d21u);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  const std::size_t batch = static_cast<std::size_t>(agent.config().batch_size);
  const std::size_t ready = std::max(batch, static_cast<std::size_t>(opt.warmup_transitions));

  std::vector<TrainLogRow> log;
  for (int ep = 0; ep < opt.episodes; ++ep) {
    int offset = ep % opt.calendar_days;
    if (offset == 0) env.begin_horizon();
    int day = opt.first_day + offset;
    EnvState s = opt.fixed_profile ? env.reset(day, *opt.fixed_profile) : env.reset(day);
    Observation obs = normalize_state(env_cfg, s);
    TrainLogRow row;
    row.episode = ep;
    row.day = day;
    while (!env.done()) {
      SquashedAction a;
      if (buffer.size() < static_cast<std::size_t>(opt.warmup_transitions))
        for (auto& v : a) v = uniform(warmup_rng);
      else
        a = agent.act(obs, true);
      StepOutcome out = env.step(to_env_action(a));
      Observation next = normalize_state(env_cfg, out.next_state);
      buffer.push({obs, a, out.reward_total, next, out.done});
      row.episode_return += out.reward_total;
      row.operational_cost_usd += out.powers.p_grid * s.price * env_cfg.dt_hours;
      row.soc_violations += out.soc_violation ? 1 : 0;
      if (buffer.size() >= ready)
        for (int u = 0; u < opt.updates_per_step; ++u) agent.update(buffer);
      s = out.next_state;
      obs = next;
    }
    row.buffer_size = buffer.size();
    log.push_back(row);
    if (opt.checkpoint_every > 0 && opt.on_checkpoint && (ep + 1) % opt.checkpoint_every == 0) opt.on_checkpoint(ep);
  }
  return log;
}

inline TrainOptions train_options(const SacConfig& c, int calendar_days) {
  TrainOptions o;
  o.episodes = c.episodes;
  o.calendar_days = calendar_days;
  o.warmup_transitions = c.warmup_transitions;
  o.updates_per_step = c.updates_per_step;
  o.buffer_capacity = c.buffer_capacity;
  return o;
}

inline TrainOptions train_options(const Td3Config& c, int calendar_days) {
  TrainOptions o;
  o.episodes = c.episodes;
  o.calendar_days = calendar_days;
  o.warmup_transitions = c.warmup_transitions;
  o.updates_per_step = c.updates_per_step;
  o.buffer_capacity = c.buffer_capacity;
  return o;
}

}  // namespace evcs
