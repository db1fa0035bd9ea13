#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "evcs/agents.hpp"
#include "evcs/env.hpp"

namespace evcs {

struct CostBreakdown {
  double operation_usd = 0.0;
  double degradation_usd = 0.0;
  double capital_amortized_usd = 0.0;
  double total_usd = 0.0;
};

inline CostBreakdown make_breakdown(double operation, double degradation, double capital_amortized) {
  return {operation, degradation, capital_amortized, operation + degradation + capital_amortized};
}

// Cost breakdown recomputed from a trace: grid purchases plus throughput wear,
// with capital spread over `days` of service life.
inline CostBreakdown breakdown_from_trace(const EnvConfig& cfg, const std::vector<TraceRow>& trace, double days) {
  double op = 0.0, throughput = 0.0;
  for (const auto& r : trace) {
    op += r.powers.p_grid * r.price * cfg.dt_hours;
    throughput += (r.powers.p_ch + r.powers.p_dis) * cfg.dt_hours;
  }
  return make_breakdown(op, degradation_rate(cfg.scenario) * throughput,
                        capital_cost(cfg.scenario) * days / cfg.service_life_days);
}

// Action frequencies on the net BESS command a1 - a2 in [-1, 1] and the grid
// command a3 in [0, 1].
struct ActionHistogram {
  int bins = 20;
  std::vector<long> bess_net;
  std::vector<long> grid;

  ActionHistogram() : ActionHistogram(20) {}
  explicit ActionHistogram(int n) : bins(n), bess_net(static_cast<std::size_t>(n), 0), grid(static_cast<std::size_t>(n), 0) {
    if (n <= 0) throw std::invalid_argument("histogram needs at least one bin");
  }

  static int bin_of(double x, double lo, double hi, int n) {
    int k = static_cast<int>((x - lo) / (hi - lo) * n);
    return std::clamp(k, 0, n - 1);
  }

  void add(const Action& a) {
    ++bess_net[static_cast<std::size_t>(bin_of(a.a1 - a.a2, -1.0, 1.0, bins))];
    ++grid[static_cast<std::size_t>(bin_of(a.a3, 0.0, 1.0, bins))];
  }

  long total() const { return std::accumulate(bess_net.begin(), bess_net.end(), 0L); }
};

struct EvalResult {
  std::vector<double> episode_returns;
  double mean_return = 0.0;
  double cash_cost_usd = 0.0;
  CostBreakdown cost;
  ActionHistogram histogram;
  int soc_violations = 0;
  std::vector<TraceRow> trace;
};

struct EvalOptions {
  int episodes = 20;
  int first_day = 0;
  int calendar_days = 365;
  std::optional<LoadProfile> fixed_profile;
  int histogram_bins = 20;
};

// Deterministic rollouts of `policy`, one day per episode, from a fresh cycle
// horizon.
inline EvalResult evaluate(const EnvConfig& cfg, const Policy& policy, const EvalOptions& opt, std::uint64_t seed) {
  if (opt.episodes < 0 || opt.calendar_days <= 0) throw std::invalid_argument("evaluate: bad episode counts");
  Environment env(cfg, seed);
  env.set_record_trace(true);
  env.begin_horizon();
  EvalResult res;
  res.histogram = ActionHistogram(opt.histogram_bins);
  for (int ep = 0; ep < opt.episodes; ++ep) {
    int day = opt.first_day + ep % opt.calendar_days;
    EnvState s = opt.fixed_profile ? env.reset(day, *opt.fixed_profile) : env.reset(day);
    double ret = 0.0;
    while (!env.done()) {
      Action a = policy(s, normalize_state(cfg, s));
      res.histogram.add(a);
      StepOutcome out = env.step(a);
      ret += out.reward_total;
      res.cash_cost_usd += out.cash_cost_usd;
      res.soc_violations += out.soc_violation ? 1 : 0;
      s = out.next_state;
    }
    res.episode_returns.push_back(ret);
  }
  res.trace = env.trace();
  if (!res.episode_returns.empty())
    res.mean_return = std::accumulate(res.episode_returns.begin(), res.episode_returns.end(), 0.0) /
                      static_cast<double>(res.episode_returns.size());
  res.cost = breakdown_from_trace(cfg, res.trace, static_cast<double>(opt.episodes));
  return res;
}

}  // namespace evcs
