#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "evcs/battery.hpp"
#include "evcs/fleet.hpp"
#include "evcs/market.hpp"

namespace evcs {

struct EnvConfig {
  BessScenarioSpec scenario;
  FleetSpec fleet;
  PriceSchedule schedule;
  int intervals = 24;
  double dt_hours = 1.0;
  double p_threshold_kw = 330.0;
  double converter_cap_kw = 550.0;
  // D in the per-step reward normalization; also the cycle-budget horizon.
  int horizon_days = 365;
  double service_life_days = 3650.0;
  std::optional<double> initial_soc;
  bool track_soc_violations = true;

  double start_soc() const { return initial_soc.value_or(0.5 * (scenario.soc_min + scenario.soc_max)); }

  // Cycle life pro-rated onto the simulated horizon.
  double cycle_budget_for_horizon() const {
    return static_cast<double>(scenario.cycle_budget) * horizon_days / service_life_days;
  }

  void validate() const {
    scenario.validate();
    schedule.validate();
    fleet.validate(intervals);
    auto fail = [](const std::string& what) { throw std::invalid_argument("env: " + what); };
    if (intervals <= 0) fail("intervals must be positive");
    if (std::abs(intervals * dt_hours - 24.0) > 1e-9) fail("intervals x dt_hours must equal 24");
    if (schedule.intervals() != intervals) fail("price schedule length must equal intervals");
    if (!(p_threshold_kw > 0)) fail("p_threshold_kw must be positive");
    if (!(converter_cap_kw > 0)) fail("converter_cap_kw must be positive");
    if (horizon_days <= 0) fail("horizon_days must be positive");
    if (!(service_life_days > 0)) fail("service_life_days must be positive");
    double s0 = start_soc();
    if (s0 < scenario.soc_min || s0 > scenario.soc_max) fail("initial_soc outside [soc_min, soc_max]");
  }
};

// Threshold at 60% of the fleet's peak aggregate draw; converter sized for the
// whole fleet.
inline EnvConfig default_env_config(ScenarioId id = ScenarioId::SLB80, int intervals = 24) {
  EnvConfig c;
  c.scenario = default_scenario(id);
  c.fleet = default_fleet(intervals);
  c.schedule = default_schedule(intervals);
  c.intervals = intervals;
  c.dt_hours = 24.0 / intervals;
  c.p_threshold_kw = 0.6 * c.fleet.max_aggregate_kw();
  c.converter_cap_kw = c.fleet.max_aggregate_kw();
  return c;
}

struct EnvState {
  int day_index = 0;
  int t = 0;
  double soc = 0.5;
  double price = 0.0;
  double ev_load_kw = 0.0;
};

// Commands in [0,1]: charge BESS from grid, discharge BESS to EVs, grid to EVs.
struct Action {
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
};

struct Powers {
  // Requested before projection.
  double p_ch_req = 0.0;
  double p_dis_req = 0.0;
  double p_ev_grid_req = 0.0;
  // Realized.
  double p_ch = 0.0;
  double p_dis = 0.0;
  double p_grid = 0.0;
  double p_grid_ev = 0.0;

  double balance_residual(double ev_load_kw) const { return (p_grid + p_dis) - (ev_load_kw + p_ch); }
};

struct RewardComponents {
  double r_pb = 0.0;
  double r_ch = 0.0;
  double r_dis = 0.0;
  double r_peak = 0.0;
  double c_deg = 0.0;
  double e_cycle = 0.0;

  double combined() const { return r_pb + r_ch + r_dis + r_peak - c_deg + e_cycle; }
};

inline constexpr double kCyclePenalty = -1000.0;

// Maps the raw command onto admissible powers. After projection:
// p_grid + p_dis == ev_load + p_ch, EV demand is fully served, the BESS never
// exports, and the SOC stays inside [soc_min, soc_max].
inline Powers project_action(const EnvConfig& cfg, double soc, double ev_load_kw, Action raw) {
  const auto& spec = cfg.scenario;
  BessState st{soc, 0.0, 0.0};
  double a1 = std::clamp(raw.a1, 0.0, 1.0);
  double a2 = std::clamp(raw.a2, 0.0, 1.0);
  double a3 = std::clamp(raw.a3, 0.0, 1.0);
  double load = std::max(0.0, ev_load_kw);

  Powers p;
  p.p_ch_req = a1 * charge_bound(spec, st, cfg.dt_hours);
  p.p_dis_req = a2 * discharge_bound(spec, st, cfg.dt_hours);
  p.p_ev_grid_req = a3 * cfg.converter_cap_kw;

  double ch = p.p_ch_req;
  double dis = p.p_dis_req;
  double netted = std::min(ch, dis);
  ch -= netted;
  dis -= netted;

  // Scale the BESS and grid shares of the EV supply so they sum to the load.
  if (load <= 0.0) {
    dis = 0.0;
  } else if (double requested = dis + p.p_ev_grid_req; requested > 0.0) {
    dis *= load / requested;
  }

  dis = std::min({dis, window_discharge_bound(spec, st, cfg.dt_hours), load});
  ch = std::min(ch, window_charge_bound(spec, st, cfg.dt_hours));

  p.p_ch = ch;
  p.p_dis = dis;
  p.p_grid_ev = load - dis;
  p.p_grid = p.p_grid_ev + ch;
  return p;
}

// Whether the unprojected request would have pushed the SOC out of its window.
inline bool request_violates_soc(const BessScenarioSpec& spec, double soc, double p_ch_req, double p_dis_req,
                                 double dt_hours) {
  double next = soc_after(spec, soc, p_ch_req, p_dis_req, dt_hours);
  return next < spec.soc_min - kSocTolerance || next > spec.soc_max + kSocTolerance;
}

template <class Rng>
RewardComponents reward_components(const EnvConfig& cfg, int day_index, int t, double ev_load_kw,
                                   const Powers& p, double horizon_cycles, Rng& rng) {
  RewardComponents r;
  double price = cfg.schedule.price_at(day_index, t);
  double future = cfg.schedule.future_price_sample(day_index, t, rng);
  double deviation = (ev_load_kw + p.p_ch - p.p_dis) - cfg.p_threshold_kw;
  r.r_pb = -deviation * deviation;
  r.r_ch = p.p_ch * (future - price);
  r.r_dis = p.p_dis * (price - future);
  r.r_peak = cfg.schedule.is_peak(day_index, t) ? r.r_pb : 0.0;
  r.c_deg = degradation_rate(cfg.scenario) * (p.p_ch + p.p_dis) * cfg.dt_hours;
  r.e_cycle = horizon_cycles >= cfg.cycle_budget_for_horizon() ? kCyclePenalty : 0.0;
  return r;
}

inline double normalize_feature(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

inline std::array<double, 4> normalize_state(const EnvConfig& cfg, const EnvState& s) {
  return {normalize_feature(s.t, 0.0, cfg.intervals - 1.0),
          normalize_feature(s.soc, cfg.scenario.soc_min, cfg.scenario.soc_max),
          normalize_feature(s.price, cfg.schedule.min_price(), cfg.schedule.max_price()),
          normalize_feature(s.ev_load_kw, 0.0, cfg.fleet.max_aggregate_kw())};
}

struct TraceRow {
  int day = 0;
  int t = 0;
  double price = 0.0;
  double ev_load_kw = 0.0;
  Action action;
  Powers powers;
  double soc_before = 0.0;
  double soc_after = 0.0;
  RewardComponents components;
  double reward = 0.0;
  double cash_cost_usd = 0.0;
  bool soc_violation = false;
};

struct StepOutcome {
  double reward_total = 0.0;
  RewardComponents components;
  Powers powers;
  double cash_cost_usd = 0.0;
  EnvState next_state;
  bool done = false;
  bool soc_violation = false;
};

// Recount of SOC-window violations by replaying the requested powers.
inline int soc_violation_count(const BessScenarioSpec& spec, double dt_hours, const std::vector<TraceRow>& trace) {
  int n = 0;
  for (const auto& row : trace)
    n += request_violates_soc(spec, row.soc_before, row.powers.p_ch_req, row.powers.p_dis_req, dt_hours) ? 1 : 0;
  return n;
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "day,t,price,ev_load_kw,a1,a2,a3,p_ch_kw,p_dis_kw,p_grid_kw,p_grid_ev_kw,soc,"
         "r_pb,r_ch,r_dis,r_peak,c_deg,e_cycle,reward,cash_cost_usd,soc_violation\n";
  for (const auto& r : trace) {
    out << r.day << ',' << r.t << ',' << r.price << ',' << r.ev_load_kw << ',' << r.action.a1 << ','
        << r.action.a2 << ',' << r.action.a3 << ',' << r.powers.p_ch << ',' << r.powers.p_dis << ','
        << r.powers.p_grid << ',' << r.powers.p_grid_ev << ',' << r.soc_after << ',' << r.components.r_pb << ','
        << r.components.r_ch << ',' << r.components.r_dis << ',' << r.components.r_peak << ','
        << r.components.c_deg << ',' << r.components.e_cycle << ',' << r.reward << ',' << r.cash_cost_usd << ','
        << (r.soc_violation ? 1 : 0) << '\n';
  }
}

// Independent, reproducible generator for a (seed, tag, index) triple.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t tag, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Stream for the `visit`-th draw of a calendar day.
inline std::mt19937_64 day_stream(std::uint64_t seed, int day_index, int visit = 0) {
  return make_stream(seed, 0x6c6f6164u + static_cast<std::uint32_t>(visit), static_cast<std::uint64_t>(day_index));
}

// One charging station. Day profiles depend only on (seed, day_index, visit),
// where visit counts earlier resets of the same day; the reward sampler has
// its own stream. Cumulative throughput persists across
// resets until begin_horizon().
class Environment {
 public:
  Environment(EnvConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), seed_(seed), reward_rng_(make_stream(seed, 0x72657764u)) {
    cfg_.validate();
    battery_.soc = cfg_.start_soc();
  }

  const EnvConfig& config() const { return cfg_; }

  LoadProfile profile_for(int day_index, int visit = 0) const {
    auto rng = day_stream(seed_, day_index, visit);
    return build_load_profile(cfg_.fleet, day_index, cfg_.schedule.calendar.day_type(day_index), cfg_.intervals,
                              cfg_.dt_hours, rng);
  }

  EnvState reset(int day_index) { return reset(day_index, profile_for(day_index, visits_[day_index]++)); }

  EnvState reset(int day_index, LoadProfile profile) {
    if (static_cast<int>(profile.kw_per_interval.size()) != cfg_.intervals)
      throw std::invalid_argument("reset: profile length differs from intervals");
    profile_ = std::move(profile);
    day_ = day_index;
    t_ = 0;
    battery_.soc = cfg_.start_soc();
    return state();
  }

  void begin_horizon() {
    battery_.throughput_kwh = 0.0;
    battery_.cycles = 0.0;
  }

  EnvState state() const {
    EnvState s;
    s.day_index = day_;
    s.t = t_;
    s.soc = battery_.soc;
    if (t_ < cfg_.intervals) {
      s.price = cfg_.schedule.price_at(day_, t_);
      s.ev_load_kw = profile_.kw_per_interval[static_cast<std::size_t>(t_)];
    }
    return s;
  }

  std::array<double, 4> observe() const { return normalize_state(cfg_, state()); }

  bool done() const { return t_ >= cfg_.intervals; }

  StepOutcome step(Action raw) {
    if (done()) throw std::logic_error("step called on a finished episode");
    EnvState s = state();
    StepOutcome out;
    out.powers = project_action(cfg_, s.soc, s.ev_load_kw, raw);
    out.soc_violation = cfg_.track_soc_violations &&
                        request_violates_soc(cfg_.scenario, s.soc, out.powers.p_ch_req, out.powers.p_dis_req,
                                             cfg_.dt_hours);
    battery_ = apply_transition(cfg_.scenario, battery_, out.powers.p_ch, out.powers.p_dis, cfg_.dt_hours);
    out.components =
        reward_components(cfg_, day_, t_, s.ev_load_kw, out.powers, battery_.cycles, reward_rng_);
    out.reward_total = out.components.combined() / (static_cast<double>(cfg_.horizon_days) * cfg_.intervals);
    out.cash_cost_usd = out.powers.p_grid * s.price * cfg_.dt_hours + out.components.c_deg;
    ++t_;
    out.done = done();
    out.next_state = state();

    if (record_trace_) {
      TraceRow row;
      row.day = day_;
      row.t = s.t;
      row.price = s.price;
      row.ev_load_kw = s.ev_load_kw;
      row.action = raw;
      row.powers = out.powers;
      row.soc_before = s.soc;
      row.soc_after = battery_.soc;
      row.components = out.components;
      row.reward = out.reward_total;
      row.cash_cost_usd = out.cash_cost_usd;
      row.soc_violation = out.soc_violation;
      trace_.push_back(row);
    }
    return out;
  }

  const BessState& battery() const { return battery_; }
  const LoadProfile& profile() const { return profile_; }

  void set_record_trace(bool on) { record_trace_ = on; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  void clear_trace() { trace_.clear(); }

 private:
  EnvConfig cfg_;
  std::uint64_t seed_;
  std::mt19937_64 reward_rng_;
  BessState battery_;
  LoadProfile profile_;
  std::map<int, int> visits_;
  int day_ = 0;
  int t_ = 0;
  bool record_trace_ = false;
  std::vector<TraceRow> trace_;
};

}  // namespace evcs
