#pragma once

// Exact dynamic program over (interval, SOC level) for small deterministic
// dispatch instances. The decision at each interval is the next SOC level;
// the grid covers whatever the BESS does not, and the BESS never exports.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evcs/battery.hpp"
#include "evcs/env.hpp"

namespace evcs {

struct OracleInstance {
  BessScenarioSpec battery;
  std::vector<double> price_usd_per_kwh;
  std::vector<double> load_kw;
  double dt_hours = 1.0;
  double initial_soc = 0.5;
  int soc_levels = 51;
  double degradation_usd_per_kwh = 0.0;
};

inline constexpr int kOracleMaxLevels = 51;
inline constexpr int kOracleMaxIntervals = 24;

struct OracleStep {
  double p_ch = 0.0;
  double p_dis = 0.0;
  double p_grid = 0.0;
  double cost_usd = 0.0;
};

struct OracleResult {
  double optimal_cost_usd = 0.0;
  double grid_only_cost_usd = 0.0;
  std::vector<int> level_path;     // intervals + 1 entries
  std::vector<double> soc_path;    // intervals + 1 entries
  std::vector<OracleStep> dispatch;
};

class OracleTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline double oracle_level_soc(const OracleInstance& inst, int k) {
  const auto& b = inst.battery;
  return b.soc_min + (b.soc_max - b.soc_min) * k / (inst.soc_levels - 1);
}

inline int oracle_initial_level(const OracleInstance& inst) {
  const auto& b = inst.battery;
  double x = (inst.initial_soc - b.soc_min) / (b.soc_max - b.soc_min) * (inst.soc_levels - 1);
  int k = static_cast<int>(std::lround(x));
  if (k < 0 || k >= inst.soc_levels || std::abs(x - k) > 1e-9)
    throw std::invalid_argument("oracle: initial_soc is not on the SOC grid");
  return k;
}

inline void validate_oracle_instance(const OracleInstance& inst) {
  std::size_t n = inst.price_usd_per_kwh.size();
  if (n == 0 || inst.load_kw.size() != n) throw std::invalid_argument("oracle: price and load vectors must match");
  if (static_cast<int>(n) > kOracleMaxIntervals || inst.soc_levels > kOracleMaxLevels)
    throw OracleTooLarge("oracle: instance exceeds " + std::to_string(kOracleMaxIntervals) + " intervals x " +
                         std::to_string(kOracleMaxLevels) + " SOC levels");
  if (inst.soc_levels < 2) throw std::invalid_argument("oracle: need at least two SOC levels");
  if (!(inst.dt_hours > 0)) throw std::invalid_argument("oracle: dt_hours must be positive");
  for (double l : inst.load_kw)
    if (l < 0) throw std::invalid_argument("oracle: negative load");
  inst.battery.validate();
}

// Powers and cost of moving from level i to level j during interval t, or
// nothing if the move needs grid export.
inline std::optional<OracleStep> oracle_move(const OracleInstance& inst, int t, int i, int j) {
  const auto& b = inst.battery;
  const double cap = b.usable_capacity_kwh();
  const double load = inst.load_kw[static_cast<std::size_t>(t)];
  double d_soc = oracle_level_soc(inst, j) - oracle_level_soc(inst, i);
  OracleStep s;
  if (d_soc > 0) {
    s.p_ch = d_soc * cap / (b.eta_ch * inst.dt_hours);
  } else if (d_soc < 0) {
    s.p_dis = -d_soc * cap * b.eta_dis / inst.dt_hours;
    if (s.p_dis > load + 1e-9) return std::nullopt;
    s.p_dis = std::min(s.p_dis, load);
  }
  s.p_grid = load - s.p_dis + s.p_ch;
  s.cost_usd = s.p_grid * inst.price_usd_per_kwh[static_cast<std::size_t>(t)] * inst.dt_hours +
               inst.degradation_usd_per_kwh * (s.p_ch + s.p_dis) * inst.dt_hours;
  return s;
}

inline OracleResult run_oracle(const OracleInstance& inst) {
  validate_oracle_instance(inst);
  const int T = static_cast<int>(inst.load_kw.size());
  const int L = inst.soc_levels;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> value(static_cast<std::size_t>(T + 1), std::vector<double>(static_cast<std::size_t>(L), inf));
  std::vector<std::vector<int>> choice(static_cast<std::size_t>(T), std::vector<int>(static_cast<std::size_t>(L), -1));
  std::fill(value[static_cast<std::size_t>(T)].begin(), value[static_cast<std::size_t>(T)].end(), 0.0);

  for (int t = T - 1; t >= 0; --t) {
    for (int i = 0; i < L; ++i) {
      double best = inf;
      int arg = -1;
      for (int j = 0; j < L; ++j) {
        auto mv = oracle_move(inst, t, i, j);
        if (!mv) continue;
        double v = mv->cost_usd + value[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(j)];
        if (v < best - 1e-12) {
          best = v;
          arg = j;
        }
      }
      value[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = best;
      choice[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = arg;
    }
  }

  OracleResult res;
  int k = oracle_initial_level(inst);
  res.optimal_cost_usd = value[0][static_cast<std::size_t>(k)];
  res.level_path.push_back(k);
  res.soc_path.push_back(oracle_level_soc(inst, k));
  for (int t = 0; t < T; ++t) {
    int next = choice[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
    res.dispatch.push_back(*oracle_move(inst, t, k, next));
    k = next;
    res.level_path.push_back(k);
    res.soc_path.push_back(oracle_level_soc(inst, k));
  }
  // Idle battery: every interval served from the grid.
  int k0 = res.level_path.front();
  for (int t = 0; t < T; ++t) res.grid_only_cost_usd += oracle_move(inst, t, k0, k0)->cost_usd;
  return res;
}

// Instance for one simulated day of an environment configuration.
inline OracleInstance oracle_instance(const EnvConfig& cfg, int day_index, const LoadProfile& profile,
                                      int soc_levels = kOracleMaxLevels) {
  OracleInstance inst;
  inst.battery = cfg.scenario;
  inst.price_usd_per_kwh = cfg.schedule.day_prices(day_index);
  inst.load_kw = profile.kw_per_interval;
  inst.dt_hours = cfg.dt_hours;
  inst.initial_soc = cfg.start_soc();
  inst.soc_levels = soc_levels;
  inst.degradation_usd_per_kwh = degradation_rate(cfg.scenario);
  return inst;
}

}  // namespace evcs
