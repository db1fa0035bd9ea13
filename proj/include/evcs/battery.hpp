#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

namespace evcs {

enum class ScenarioId { Fresh, SLB80, SLB60, SLB40 };

inline constexpr std::array<ScenarioId, 4> kAllScenarios{
    ScenarioId::Fresh, ScenarioId::SLB80, ScenarioId::SLB60, ScenarioId::SLB40};

inline std::string_view to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::Fresh: return "Fresh";
    case ScenarioId::SLB80: return "SLB80";
    case ScenarioId::SLB60: return "SLB60";
    case ScenarioId::SLB40: return "SLB40";
  }
  return "?";
}

inline ScenarioId scenario_from_string(std::string_view name) {
  for (auto id : kAllScenarios)
    if (to_string(id) == name) return id;
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

// Raised when a transition would leave the SOC window. Projection upstream is
// supposed to make this unreachable, so it is treated as an internal bug.
class BoundsViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct BessScenarioSpec {
  ScenarioId scenario_id = ScenarioId::Fresh;
  double nominal_capacity_kwh = 200.0;
  double soh = 1.0;
  double alpha_capital = 1.0;
  double price_per_kwh_usd = 389.0;
  long cycle_budget = 15000;
  double eta_ch = 0.95;
  double eta_dis = 0.95;
  double soc_min = 0.1;
  double soc_max = 0.9;
  // End-of-life threshold as a fraction of nominal. Informational only:
  // capacity is constant within a scenario.
  double eol_fraction = 0.2;

  double usable_capacity_kwh() const { return soh * nominal_capacity_kwh; }

  // Throws std::invalid_argument naming the first broken invariant.
  void validate() const {
    auto fail = [](const char* what) { throw std::invalid_argument(std::string("battery: ") + what); };
    if (!(nominal_capacity_kwh > 0)) fail("nominal_capacity_kwh must be positive");
    if (!(soh > eol_fraction && soh <= 1.0)) fail("soh must lie in (eol_fraction, 1]");
    if (!(alpha_capital >= 0 && alpha_capital <= 1.0)) fail("alpha_capital must lie in [0, 1]");
    if (!(price_per_kwh_usd >= 0)) fail("price_per_kwh_usd must be non-negative");
    if (cycle_budget <= 0) fail("cycle_budget must be positive");
    if (!(eta_ch > 0 && eta_ch <= 1)) fail("eta_ch must lie in (0, 1]");
    if (!(eta_dis > 0 && eta_dis <= 1)) fail("eta_dis must lie in (0, 1]");
    if (!(soc_min >= 0 && soc_min < soc_max && soc_max <= 1)) fail("need 0 <= soc_min < soc_max <= 1");
  }
};

// LFP pack defaults: 200 kWh nominal, SOH 1.0/0.8/0.6/0.4, capital factor
// 1.0/0.75/0.57/0.40 on $389/kWh, cycle life 15000/10000/7500/5000.
inline BessScenarioSpec default_scenario(ScenarioId id) {
  BessScenarioSpec s;
  s.scenario_id = id;
  switch (id) {
    case ScenarioId::Fresh: s.soh = 1.0; s.alpha_capital = 1.0;  s.cycle_budget = 15000; break;
    case ScenarioId::SLB80: s.soh = 0.8; s.alpha_capital = 0.75; s.cycle_budget = 10000; break;
    case ScenarioId::SLB60: s.soh = 0.6; s.alpha_capital = 0.57; s.cycle_budget = 7500;  break;
    case ScenarioId::SLB40: s.soh = 0.4; s.alpha_capital = 0.40; s.cycle_budget = 5000;  break;
  }
  return s;
}

struct BessState {
  double soc = 0.5;
  double throughput_kwh = 0.0;
  double cycles = 0.0;
};

inline double capital_cost(const BessScenarioSpec& spec) {
  return spec.alpha_capital * spec.usable_capacity_kwh() * spec.price_per_kwh_usd;
}

// Per-cycle capital cost spread over one full cycle of throughput
// (charge + discharge = 2 x usable capacity), giving $/kWh moved.
inline double degradation_rate(const BessScenarioSpec& spec) {
  return capital_cost(spec) /
         (static_cast<double>(spec.cycle_budget) * 2.0 * spec.usable_capacity_kwh());
}

inline double equivalent_cycles(const BessScenarioSpec& spec, double throughput_kwh) {
  return throughput_kwh / (2.0 * spec.usable_capacity_kwh());
}

// Charge power that would bring the pack exactly to soc = 1.
inline double charge_bound(const BessScenarioSpec& spec, const BessState& state, double dt_hours = 1.0) {
  return std::max(0.0, spec.usable_capacity_kwh() * (1.0 - state.soc) / spec.eta_ch / dt_hours);
}

// Discharge power that would bring the pack exactly to soc = 0.
inline double discharge_bound(const BessScenarioSpec& spec, const BessState& state, double dt_hours = 1.0) {
  return std::max(0.0, spec.usable_capacity_kwh() * state.soc * spec.eta_dis / dt_hours);
}

// The same bounds restricted to the operating window [soc_min, soc_max].
inline double window_charge_bound(const BessScenarioSpec& spec, const BessState& state, double dt_hours = 1.0) {
  double headroom = spec.usable_capacity_kwh() * (spec.soc_max - state.soc) / spec.eta_ch / dt_hours;
  return std::clamp(headroom, 0.0, charge_bound(spec, state, dt_hours));
}

inline double window_discharge_bound(const BessScenarioSpec& spec, const BessState& state, double dt_hours = 1.0) {
  double reserve = spec.usable_capacity_kwh() * (state.soc - spec.soc_min) * spec.eta_dis / dt_hours;
  return std::clamp(reserve, 0.0, discharge_bound(spec, state, dt_hours));
}

// SOC reached from `soc` with grid-side charge/discharge powers held for dt.
inline double soc_after(const BessScenarioSpec& spec, double soc, double p_ch_kw, double p_dis_kw,
                        double dt_hours) {
  return soc + (spec.eta_ch * p_ch_kw - p_dis_kw / spec.eta_dis) * dt_hours / spec.usable_capacity_kwh();
}

inline constexpr double kSocTolerance = 1e-9;

inline BessState apply_transition(const BessScenarioSpec& spec, const BessState& state, double p_ch_kw,
                                  double p_dis_kw, double dt_hours) {
  if (p_ch_kw < 0 || p_dis_kw < 0)
    throw BoundsViolation("negative charge/discharge power");
  double soc = soc_after(spec, state.soc, p_ch_kw, p_dis_kw, dt_hours);
  if (soc < spec.soc_min - kSocTolerance || soc > spec.soc_max + kSocTolerance)
    throw BoundsViolation("soc " + std::to_string(soc) + " leaves [" + std::to_string(spec.soc_min) + ", " +
                          std::to_string(spec.soc_max) + "]");
  BessState next;
  next.soc = std::clamp(soc, spec.soc_min, spec.soc_max);
  next.throughput_kwh = state.throughput_kwh + (p_ch_kw + p_dis_kw) * dt_hours;
  next.cycles = equivalent_cycles(spec, next.throughput_kwh);
  return next;
}

}  // namespace evcs
