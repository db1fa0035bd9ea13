#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "evcs/env.hpp"

using namespace evcs;

namespace {

EnvConfig small_config() {
  EnvConfig c = default_env_config(ScenarioId::SLB80);
  c.horizon_days = 30;
  return c;
}

LoadProfile constant_profile(double kw, int intervals = 24) {
  LoadProfile p;
  p.kw_per_interval.assign(static_cast<std::size_t>(intervals), kw);
  return p;
}

}  // namespace

TEST(Reset, DefaultStartsMidWindow) {
  Environment env(small_config(), 1);
  EnvState s = env.reset(1);
  EXPECT_EQ(s.t, 0);
  EXPECT_DOUBLE_EQ(s.soc, 0.5);
  EXPECT_FALSE(env.done());
}

TEST(Reset, EmptyFleetHasNoLoad) {
  auto cfg = small_config();
  cfg.fleet.n_commercial = cfg.fleet.n_private = 0;
  Environment env(cfg, 1);
  env.reset(2);
  for (double v : env.profile().kw_per_interval) EXPECT_EQ(v, 0.0);
}

TEST(Reset, SameSeedAndDayGiveSameProfile) {
  Environment a(small_config(), 42), b(small_config(), 42), c(small_config(), 43);
  a.reset(9);
  b.reset(3);
  b.reset(9);
  c.reset(9);
  EXPECT_EQ(a.profile().kw_per_interval, b.profile().kw_per_interval);
  EXPECT_NE(a.profile().kw_per_interval, c.profile().kw_per_interval);
}

TEST(Reset, RevisitedDayIsResampled) {
  Environment env(small_config(), 42);
  env.reset(9);
  auto first = env.profile().kw_per_interval;
  env.reset(9);
  EXPECT_NE(env.profile().kw_per_interval, first);
  EXPECT_EQ(env.profile().kw_per_interval, env.profile_for(9, 1).kw_per_interval);
  EXPECT_EQ(first, env.profile_for(9, 0).kw_per_interval);
}

TEST(Projection, NoLoadMeansNoDischarge) {
  auto cfg = small_config();
  Powers p = project_action(cfg, 0.5, 0.0, {0.0, 1.0, 1.0});
  EXPECT_EQ(p.p_dis, 0.0);
  EXPECT_EQ(p.p_grid, 0.0);
  EXPECT_EQ(p.p_grid_ev, 0.0);
}

TEST(Projection, ScalesSupplySharesToLoad) {
  auto cfg = small_config();
  cfg.scenario.nominal_capacity_kwh = 1000.0;  // keep bounds far from binding
  cfg.scenario.soh = 1.0;
  cfg.converter_cap_kw = 100.0;
  double db = discharge_bound(cfg.scenario, {0.5, 0, 0}, 1.0);
  Powers p = project_action(cfg, 0.5, 50.0, {0.0, 30.0 / db, 10.0 / 100.0});
  EXPECT_NEAR(p.p_dis, 37.5, 1e-12);
  EXPECT_NEAR(p.p_grid_ev, 12.5, 1e-12);
  EXPECT_NEAR(p.p_grid, 12.5 + p.p_ch, 1e-12);
  EXPECT_NEAR(p.balance_residual(50.0), 0.0, 1e-12);
}

TEST(Projection, EqualChargeAndDischargeNetOut) {
  auto cfg = small_config();
  // soc 0.5 with equal efficiencies: charge bound C*0.5/0.95, discharge bound
  // C*0.5*0.95 differ, so pick commands that request equal powers.
  double cb = charge_bound(cfg.scenario, {0.5, 0, 0}, 1.0);
  double db = discharge_bound(cfg.scenario, {0.5, 0, 0}, 1.0);
  Powers p = project_action(cfg, 0.5, 20.0, {db / cb, 1.0, 0.0});
  EXPECT_NEAR(p.p_ch, 0.0, 1e-12);
  EXPECT_NEAR(p.p_dis, 0.0, 1e-12);
  EXPECT_NEAR(p.p_grid, 20.0, 1e-12);
}

TEST(Projection, BalanceAndWindowHoldForRandomCommands) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    auto cfg = default_env_config(kAllScenarios[static_cast<std::size_t>(i % 4)]);
    double soc = cfg.scenario.soc_min + u(rng) * (cfg.scenario.soc_max - cfg.scenario.soc_min);
    double load = u(rng) < 0.2 ? 0.0 : 600.0 * u(rng);
    Action a{u(rng), u(rng), u(rng)};
    Powers p = project_action(cfg, soc, load, a);
    ASSERT_LE(std::abs(p.balance_residual(load)), 1e-9);
    ASSERT_NEAR(p.p_dis + p.p_grid_ev, load, 1e-9);
    ASSERT_GE(p.p_ch, 0.0);
    ASSERT_GE(p.p_dis, 0.0);
    ASSERT_GE(p.p_grid_ev, -1e-12);
    ASSERT_LE(p.p_dis, load + 1e-12);
    ASSERT_FALSE(p.p_ch > 0 && p.p_dis > 0);
    double next = soc_after(cfg.scenario, soc, p.p_ch, p.p_dis, cfg.dt_hours);
    ASSERT_GE(next, cfg.scenario.soc_min - 1e-12);
    ASSERT_LE(next, cfg.scenario.soc_max + 1e-12);
  }
}

TEST(Reward, PowerBalanceTerm) {
  auto cfg = small_config();
  std::mt19937_64 rng(1);
  Powers p;
  p.p_grid = cfg.p_threshold_kw;
  auto r = reward_components(cfg, 1, 3, cfg.p_threshold_kw, p, 0.0, rng);
  EXPECT_EQ(r.r_pb, 0.0);
  auto r10 = reward_components(cfg, 1, 3, cfg.p_threshold_kw + 10.0, p, 0.0, rng);
  EXPECT_DOUBLE_EQ(r10.r_pb, -100.0);
  EXPECT_EQ(r10.r_peak, 0.0);
  auto peak = reward_components(cfg, 1, 16, cfg.p_threshold_kw + 10.0, p, 0.0, rng);
  EXPECT_DOUBLE_EQ(peak.r_peak, -100.0);
}

TEST(Reward, ChargeAndDischargeExamplesViaSampler) {
  // Schedule where every later interval has the same price so the sample is
  // deterministic: now = 0.11 at t=0, all later intervals 0.20.
  auto cfg = small_config();
  cfg.schedule = flat_schedule(0.20, 24);
  cfg.schedule.weekday_usd_per_kwh[0] = 0.11;
  std::mt19937_64 rng(7);
  Powers ch;
  ch.p_ch = 10.0;
  // At t=0 the draw may land on interval 0 itself, which zeroes the term.
  int hits = 0;
  for (int i = 0; i < 200; ++i) {
    auto r = reward_components(cfg, 1, 0, 0.0, ch, 0.0, rng);
    if (std::abs(r.r_ch - 0.9) < 1e-12) ++hits;
    else EXPECT_NEAR(r.r_ch, 0.0, 1e-12);
  }
  EXPECT_GT(hits, 150);

  auto c2 = small_config();
  c2.schedule = flat_schedule(0.11, 24);
  c2.schedule.weekday_usd_per_kwh[0] = 0.21;
  Powers dis;
  dis.p_dis = 20.0;
  hits = 0;
  for (int i = 0; i < 200; ++i) {
    auto r = reward_components(c2, 1, 0, 30.0, dis, 0.0, rng);
    if (std::abs(r.r_dis - 2.0) < 1e-12) ++hits;
    else EXPECT_NEAR(r.r_dis, 0.0, 1e-12);
  }
  EXPECT_GT(hits, 150);
}

TEST(Reward, DegradationAndCyclePenalty) {
  auto cfg = small_config();
  std::mt19937_64 rng(1);
  Powers p;
  p.p_ch = 40.0;
  auto r = reward_components(cfg, 1, 2, 10.0, p, 0.0, rng);
  EXPECT_NEAR(r.c_deg, degradation_rate(cfg.scenario) * 40.0, 1e-15);
  EXPECT_EQ(r.e_cycle, 0.0);
  double budget = cfg.cycle_budget_for_horizon();
  EXPECT_NEAR(budget, 10000.0 * 30.0 / 3650.0, 1e-12);
  EXPECT_EQ(reward_components(cfg, 1, 2, 10.0, p, budget, rng).e_cycle, -1000.0);
  EXPECT_EQ(reward_components(cfg, 1, 2, 10.0, p, budget - 1e-9, rng).e_cycle, 0.0);
}

TEST(Step, ZeroActionZeroLoadAtPeak) {
  auto cfg = small_config();
  Environment env(cfg, 3);
  env.reset(1, constant_profile(0.0));
  double norm = cfg.horizon_days * 24.0;
  for (int t = 0; t < 24; ++t) {
    StepOutcome out = env.step({0, 0, 0});
    double pb = -cfg.p_threshold_kw * cfg.p_threshold_kw;
    double mult = cfg.schedule.is_peak(1, t) ? 2.0 : 1.0;
    EXPECT_NEAR(out.reward_total, pb * mult / norm, 1e-9);
    EXPECT_EQ(out.components.r_ch, 0.0);
    EXPECT_EQ(out.components.r_dis, 0.0);
    EXPECT_EQ(out.components.c_deg, 0.0);
    EXPECT_EQ(out.cash_cost_usd, 0.0);
  }
}

TEST(Step, FullDayThenDone) {
  Environment env(small_config(), 3);
  env.reset(2);
  for (int t = 0; t < 24; ++t) {
    ASSERT_FALSE(env.done());
    auto out = env.step({0.3, 0.6, 0.5});
    EXPECT_EQ(out.done, t == 23);
  }
  EXPECT_THROW(env.step({}), std::logic_error);
}

TEST(Step, EpisodeReturnIsSumOfNormalizedComponents) {
  auto cfg = small_config();
  Environment env(cfg, 9);
  env.set_record_trace(true);
  env.reset(4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  double ret = 0.0;
  while (!env.done()) ret += env.step({u(rng), u(rng), u(rng)}).reward_total;
  double sum = 0.0;
  for (const auto& row : env.trace()) sum += row.components.combined() / (cfg.horizon_days * 24.0);
  EXPECT_NEAR(ret, sum, 1e-12);
}

TEST(Step, RewardScalesInverselyWithHorizonDays) {
  auto a = small_config();
  auto b = a;
  b.horizon_days = a.horizon_days * 3;
  b.service_life_days = a.service_life_days * 3;  // same pro-rated cycle budget
  Environment ea(a, 5), eb(b, 5);
  ea.reset(1);
  eb.reset(1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  while (!ea.done()) {
    Action act{u(rng), u(rng), u(rng)};
    double ra = ea.step(act).reward_total, rb = eb.step(act).reward_total;
    EXPECT_NEAR(rb, ra / 3.0, 1e-12 * std::abs(ra) + 1e-15);
  }
}

TEST(Step, PeakShapingDoublesPowerBalanceTerm) {
  auto base = small_config();
  auto none = base;
  none.schedule.peak.reset();
  auto all = base;
  all.schedule.peak = PeakWindow{0, 23};
  all.schedule.peak_every_day = true;
  Environment en(none, 4), ea(all, 4);
  en.reset(1);
  ea.reset(1);
  double pb_none = 0.0, pb_all = 0.0, peak_all = 0.0;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  while (!en.done()) {
    Action act{u(rng), u(rng), u(rng)};
    auto on = en.step(act);
    auto oa = ea.step(act);
    EXPECT_EQ(on.components.r_peak, 0.0);
    pb_none += on.components.r_pb;
    pb_all += oa.components.r_pb;
    peak_all += oa.components.r_peak;
  }
  EXPECT_DOUBLE_EQ(pb_none, pb_all);
  EXPECT_DOUBLE_EQ(pb_all + peak_all, 2.0 * pb_none);
}

TEST(Step, DegradationMatchesBatteryAccounting) {
  auto cfg = small_config();
  Environment env(cfg, 8);
  env.set_record_trace(true);
  env.begin_horizon();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  double c_deg = 0.0;
  for (int day = 0; day < 3; ++day) {
    env.reset(day);
    while (!env.done()) c_deg += env.step({u(rng), u(rng), u(rng)}).components.c_deg;
  }
  EXPECT_NEAR(c_deg, degradation_rate(cfg.scenario) * env.battery().throughput_kwh, 1e-9);
  EXPECT_NEAR(env.battery().cycles, env.battery().throughput_kwh / (2.0 * cfg.scenario.usable_capacity_kwh()), 1e-12);
}

TEST(Step, CyclePenaltyFiresOnceBudgetSpent) {
  auto cfg = small_config();
  cfg.horizon_days = 1;
  cfg.scenario.cycle_budget = 1;
  cfg.service_life_days = 100.0;  // 0.01 cycles allowed
  Environment env(cfg, 1);
  env.reset(1);
  bool seen = false;
  while (!env.done()) {
    auto out = env.step({1.0, 0.0, 1.0});
    if (env.battery().cycles >= cfg.cycle_budget_for_horizon()) {
      EXPECT_EQ(out.components.e_cycle, -1000.0);
      seen = true;
    }
  }
  EXPECT_TRUE(seen);
}

TEST(Normalize, FeatureRanges) {
  auto cfg = small_config();
  EnvState s{1, 0, cfg.scenario.soc_max, 0.16, 0.0};
  auto f = normalize_state(cfg, s);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[1], 1.0);
  EXPECT_NEAR(f[2], 0.5, 1e-12);
  EXPECT_EQ(f[3], 0.0);
  EXPECT_EQ(normalize_feature(3.0, 1.0, 1.0), 0.0);
  s.t = 23;
  EXPECT_EQ(normalize_state(cfg, s)[0], 1.0);
}

TEST(Violations, ZeroActionsNeverViolate) {
  Environment env(small_config(), 2);
  env.set_record_trace(true);
  env.reset(1);
  while (!env.done()) EXPECT_FALSE(env.step({0, 0, 0}).soc_violation);
  EXPECT_EQ(soc_violation_count(env.config().scenario, 1.0, env.trace()), 0);
}

TEST(Violations, ChargingFromFullCountsEveryStep) {
  auto cfg = small_config();
  cfg.initial_soc = cfg.scenario.soc_max;
  Environment env(cfg, 2);
  env.set_record_trace(true);
  env.reset(1);
  int n = 0;
  while (!env.done()) {
    auto out = env.step({1.0, 0.0, 1.0});
    EXPECT_TRUE(out.soc_violation);
    EXPECT_NEAR(out.next_state.soc, cfg.scenario.soc_max, 1e-12);
    ++n;
  }
  EXPECT_EQ(soc_violation_count(cfg.scenario, 1.0, env.trace()), n);
}

TEST(Violations, ReplayRecountMatchesStepFlags) {
  auto cfg = small_config();
  Environment env(cfg, 12);
  env.set_record_trace(true);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  int flagged = 0;
  for (int d = 0; d < 10; ++d) {
    env.reset(d);
    while (!env.done()) flagged += env.step({u(rng), u(rng), u(rng)}).soc_violation ? 1 : 0;
  }
  // Independent replay: recompute requests from the recorded actions.
  int recount = 0;
  for (const auto& row : env.trace()) {
    BessState st{row.soc_before, 0, 0};
    double ch = row.action.a1 * cfg.scenario.usable_capacity_kwh() * (1 - st.soc) / cfg.scenario.eta_ch;
    double dis = row.action.a2 * cfg.scenario.usable_capacity_kwh() * st.soc * cfg.scenario.eta_dis;
    double next = st.soc + (cfg.scenario.eta_ch * ch - dis / cfg.scenario.eta_dis) / cfg.scenario.usable_capacity_kwh();
    if (next < cfg.scenario.soc_min - 1e-9 || next > cfg.scenario.soc_max + 1e-9) ++recount;
  }
  EXPECT_GT(flagged, 0);
  EXPECT_EQ(flagged, recount);
  EXPECT_EQ(soc_violation_count(cfg.scenario, 1.0, env.trace()), recount);
}

TEST(Trace, CsvHasHeaderAndOneRowPerStep) {
  Environment env(small_config(), 2);
  env.set_record_trace(true);
  env.reset(1);
  while (!env.done()) env.step({0.2, 0.1, 0.9});
  std::ostringstream out;
  write_trace_csv(out, env.trace());
  std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 25);
  EXPECT_EQ(text.rfind("day,t,price,ev_load_kw", 0), 0u);
}

TEST(Config, Validation) {
  auto cfg = small_config();
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.dt_hours = 0.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.p_threshold_kw = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.initial_soc = 0.95;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}
