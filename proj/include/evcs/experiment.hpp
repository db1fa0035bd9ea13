#pragma once

// Experiment orchestration: training and evaluation fan-out over scenarios
// and agents, the oracle entry point, and report emission. Artifacts live in
//   <output_dir>/<scenario>/<agent>/{train_log,eval_metrics,eval_returns,action_histogram,eval_trace}.csv
// and reports in <output_dir>/reports/.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evcs/agents.hpp"
#include "evcs/config.hpp"
#include "evcs/evaluate.hpp"
#include "evcs/oracle.hpp"

namespace evcs {

namespace fs = std::filesystem;

inline constexpr int kCsvPrecision = 12;
inline const std::vector<std::string> kAgentOrder{"sac", "td3", "rule", "random"};

inline bool is_learner(const std::string& agent) { return agent == "sac" || agent == "td3"; }

inline fs::path run_dir(const fs::path& out, ScenarioId id, const std::string& agent) {
  return out / std::string(to_string(id)) / agent;
}

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << std::setprecision(kCsvPrecision);
  return out;
}

inline void close_out(std::ofstream& out, const fs::path& p) {
  out.close();
  if (!out) throw std::runtime_error("error while writing " + p.string());
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double num(const std::string& s, const fs::path& p) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(p.string() + ": malformed number '" + s + "'");
  }
}

inline void save_net(const fs::path& p, const nn::Mlp& net) {
  auto out = open_out(p);
  nn::save_mlp(out, net);
  close_out(out, p);
}

}  // namespace detail

inline nn::Mlp load_checkpoint(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing checkpoint " + p.string());
  try {
    return nn::load_mlp(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training

struct TrainArtifact {
  ScenarioId scenario = ScenarioId::Fresh;
  std::string agent;
  fs::path dir;
  std::vector<TrainLogRow> log;
};

inline void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << "episode,day,return,operational_cost_usd,soc_violations,buffer_size\n";
  for (const auto& r : log)
    out << r.episode << ',' << r.day << ',' << r.episode_return << ',' << r.operational_cost_usd << ','
        << r.soc_violations << ',' << r.buffer_size << '\n';
}

template <class Agent>
std::vector<TrainLogRow> train_and_save(const ExperimentConfig& cfg, const EnvConfig& env, Agent& agent,
                                        TrainOptions opt, const fs::path& dir) {
  opt.first_day = cfg.first_day;
  opt.checkpoint_every = cfg.checkpoint_every;
  opt.on_checkpoint = [&](int ep) {
    char name[48];
    std::snprintf(name, sizeof name, "actor_ep%06d.mlp", ep + 1);
    detail::save_net(dir / "checkpoints" / name, agent.actor());
  };
  auto log = train(env, agent, opt, cfg.seed);
  detail::save_net(dir / "actor.mlp", agent.actor());
  detail::save_net(dir / "q1.mlp", agent.q1());
  detail::save_net(dir / "q2.mlp", agent.q2());
  auto p = dir / "train_log.csv";
  auto out = detail::open_out(p);
  write_train_log(out, log);
  detail::close_out(out, p);
  return log;
}

// Trains every learner in cfg.agents on every scenario with the same seeds.
inline std::vector<TrainArtifact> run_train(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrainArtifact> out;
  for (auto id : cfg.scenarios) {
    EnvConfig env = cfg.env_for(id);
    for (const auto& name : cfg.agents) {
      if (!is_learner(name)) continue;
      TrainArtifact art{id, name, run_dir(cfg.output_dir, id, name), {}};
      if (name == "sac") {
        SacAgent agent(cfg.sac, cfg.seed);
        art.log = train_and_save(cfg, env, agent, train_options(cfg.sac, cfg.calendar_days), art.dir);
        detail::save_net(art.dir / "value.mlp", agent.value());
      } else {
        Td3Agent agent(cfg.td3, cfg.seed);
        art.log = train_and_save(cfg, env, agent, train_options(cfg.td3, cfg.calendar_days), art.dir);
      }
      out.push_back(std::move(art));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalArtifact {
  ScenarioId scenario = ScenarioId::Fresh;
  std::string agent;
  fs::path dir;
  EvalResult result;
};

inline Policy policy_for(const ExperimentConfig& cfg, const EnvConfig& env, const std::string& agent,
                         const fs::path& actor_checkpoint) {
  if (agent == "rule") return rule_policy(env);
  if (agent == "random") return random_policy(cfg.eval_seed);
  nn::Mlp actor = load_checkpoint(actor_checkpoint);
  int want_out = agent == "sac" ? 2 * kActionDim : kActionDim;
  if (actor.input_size() != kStateDim || actor.output_size() != want_out)
    throw std::runtime_error(actor_checkpoint.string() + ": network shape does not match a " + agent + " actor");
  return agent == "sac" ? sac_greedy_policy(std::move(actor)) : td3_greedy_policy(std::move(actor));
}

inline void write_eval_artifacts(const EvalArtifact& art, const ExperimentConfig& cfg, const EvalOptions& opt) {
  const auto& r = art.result;
  {
    auto p = art.dir / "eval_metrics.csv";
    auto out = detail::open_out(p);
    out << "agent,scenario,episodes,mean_return,cash_cost_usd,operation_usd,degradation_usd,capital_amortized_usd,"
           "total_usd,soc_violations\n";
    out << art.agent << ',' << to_string(art.scenario) << ',' << r.episode_returns.size() << ',' << r.mean_return
        << ',' << r.cash_cost_usd << ',' << r.cost.operation_usd << ',' << r.cost.degradation_usd << ','
        << r.cost.capital_amortized_usd << ',' << r.cost.total_usd << ',' << r.soc_violations << '\n';
    detail::close_out(out, p);
  }
  {
    auto p = art.dir / "eval_returns.csv";
    auto out = detail::open_out(p);
    out << "episode,day,return\n";
    for (std::size_t i = 0; i < r.episode_returns.size(); ++i)
      out << i << ',' << opt.first_day + static_cast<int>(i) % opt.calendar_days << ',' << r.episode_returns[i] << '\n';
    detail::close_out(out, p);
  }
  {
    auto p = art.dir / "action_histogram.csv";
    auto out = detail::open_out(p);
    out << "axis,bin,lo,hi,count\n";
    const auto& h = r.histogram;
    for (int b = 0; b < h.bins; ++b)
      out << "bess_net," << b << ',' << -1.0 + 2.0 * b / h.bins << ',' << -1.0 + 2.0 * (b + 1) / h.bins << ','
          << h.bess_net[static_cast<std::size_t>(b)] << '\n';
    for (int b = 0; b < h.bins; ++b)
      out << "grid," << b << ',' << static_cast<double>(b) / h.bins << ',' << static_cast<double>(b + 1) / h.bins
          << ',' << h.grid[static_cast<std::size_t>(b)] << '\n';
    detail::close_out(out, p);
  }
  if (cfg.write_eval_trace) {
    auto p = art.dir / "eval_trace.csv";
    auto out = detail::open_out(p);
    write_trace_csv(out, r.trace);
    detail::close_out(out, p);
  }
}

// Deterministic rollouts for every (scenario, agent). `checkpoint` replaces
// the actor file of the learners when set.
inline std::vector<EvalArtifact> run_eval(const ExperimentConfig& cfg,
                                          const std::optional<fs::path>& checkpoint = std::nullopt) {
  cfg.validate();
  EvalOptions opt;
  opt.episodes = cfg.eval_episodes;
  opt.first_day = cfg.eval_first_day;
  opt.calendar_days = cfg.calendar_days;
  opt.histogram_bins = cfg.histogram_bins;
  std::vector<EvalArtifact> out;
  for (auto id : cfg.scenarios) {
    EnvConfig env = cfg.env_for(id);
    for (const auto& name : cfg.agents) {
      EvalArtifact art{id, name, run_dir(cfg.output_dir, id, name), {}};
      Policy policy = policy_for(cfg, env, name, checkpoint.value_or(art.dir / "actor.mlp"));
      art.result = evaluate(env, policy, opt, cfg.eval_seed);
      write_eval_artifacts(art, cfg, opt);
      out.push_back(std::move(art));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle

struct OracleRun {
  OracleInstance instance;
  OracleResult result;
};

// Exact optimum for one day of `scenario`, using the evaluation stream's
// first draw of that day's load.
inline OracleRun run_oracle(const ExperimentConfig& cfg, ScenarioId scenario, int day, int soc_levels) {
  EnvConfig env = cfg.env_for(scenario);
  Environment sim(env, cfg.eval_seed);
  OracleRun run;
  run.instance = oracle_instance(env, day, sim.profile_for(day), soc_levels);
  run.result = run_oracle(run.instance);
  return run;
}

inline void write_oracle_dispatch(std::ostream& out, const OracleRun& run) {
  out << std::setprecision(kCsvPrecision);
  out << "t,price_usd_per_kwh,ev_load_kw,p_ch_kw,p_dis_kw,p_grid_kw,soc_after,cost_usd\n";
  for (std::size_t t = 0; t < run.result.dispatch.size(); ++t) {
    const auto& d = run.result.dispatch[t];
    out << t << ',' << run.instance.price_usd_per_kwh[t] << ',' << run.instance.load_kw[t] << ',' << d.p_ch << ','
        << d.p_dis << ',' << d.p_grid << ',' << run.result.soc_path[t + 1] << ',' << d.cost_usd << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reports. Pure functions of the artifact files on disk.

struct HistogramRow {
  std::string axis;
  int bin = 0;
  double lo = 0.0;
  double hi = 0.0;
  long count = 0;
};

struct EvalSummary {
  int episodes = 0;
  double mean_return = 0.0;
  double cash_cost_usd = 0.0;
  CostBreakdown cost;
  int soc_violations = 0;
};

struct RunArtifacts {
  ScenarioId scenario = ScenarioId::Fresh;
  std::string agent;
  std::vector<TrainLogRow> train_log;
  std::optional<EvalSummary> eval;
  std::vector<HistogramRow> histogram;
};

inline std::vector<RunArtifacts> collect_artifacts(const fs::path& out_dir) {
  std::vector<RunArtifacts> runs;
  for (auto id : kAllScenarios) {
    for (const auto& agent : kAgentOrder) {
      fs::path dir = run_dir(out_dir, id, agent);
      if (!fs::is_directory(dir)) continue;
      RunArtifacts run{id, agent, {}, std::nullopt, {}};
      if (auto p = dir / "train_log.csv"; fs::exists(p))
        for (const auto& c : detail::read_csv(p)) {
          if (c.size() != 6) throw std::runtime_error(p.string() + ": expected 6 columns");
          TrainLogRow r;
          r.episode = static_cast<int>(detail::num(c[0], p));
          r.day = static_cast<int>(detail::num(c[1], p));
          r.episode_return = detail::num(c[2], p);
          r.operational_cost_usd = detail::num(c[3], p);
          r.soc_violations = static_cast<int>(detail::num(c[4], p));
          r.buffer_size = static_cast<std::size_t>(detail::num(c[5], p));
          run.train_log.push_back(r);
        }
      if (auto p = dir / "eval_metrics.csv"; fs::exists(p)) {
        auto rows = detail::read_csv(p);
        if (rows.size() != 1 || rows[0].size() != 10) throw std::runtime_error(p.string() + ": expected one 10-column row");
        const auto& c = rows[0];
        EvalSummary e;
        e.episodes = static_cast<int>(detail::num(c[2], p));
        e.mean_return = detail::num(c[3], p);
        e.cash_cost_usd = detail::num(c[4], p);
        e.cost = make_breakdown(detail::num(c[5], p), detail::num(c[6], p), detail::num(c[7], p));
        e.soc_violations = static_cast<int>(detail::num(c[9], p));
        run.eval = e;
      }
      if (auto p = dir / "action_histogram.csv"; fs::exists(p))
        for (const auto& c : detail::read_csv(p)) {
          if (c.size() != 5) throw std::runtime_error(p.string() + ": expected 5 columns");
          run.histogram.push_back({c[0], static_cast<int>(detail::num(c[1], p)), detail::num(c[2], p),
                                   detail::num(c[3], p), static_cast<long>(detail::num(c[4], p))});
        }
      if (!run.train_log.empty() || run.eval || !run.histogram.empty()) runs.push_back(std::move(run));
    }
  }
  return runs;
}

inline const std::vector<std::string> kReportDataFiles{"reward_curves.csv", "action_histograms.csv",
                                                       "cost_breakdown.csv", "comparison.csv"};

// Writes the report files into `report_dir` and returns the summary text.
inline std::string emit_reports(const std::vector<RunArtifacts>& runs, const fs::path& report_dir) {
  fs::create_directories(report_dir);
  for (const auto& f : kReportDataFiles) fs::remove(report_dir / f);

  std::ostringstream summary;
  summary << std::setprecision(kCsvPrecision);
  int trained = 0, evaluated = 0;
  for (const auto& r : runs) {
    trained += r.train_log.empty() ? 0 : 1;
    evaluated += r.eval ? 1 : 0;
  }
  summary << "runs: " << runs.size() << " (trained " << trained << ", evaluated " << evaluated << ")\n";

  if (!runs.empty()) {
    if (trained > 0) {
      auto p = report_dir / "reward_curves.csv";
      auto out = detail::open_out(p);
      out << "scenario,agent,episode,day,return,operational_cost_usd\n";
      for (const auto& r : runs)
        for (const auto& row : r.train_log)
          out << to_string(r.scenario) << ',' << r.agent << ',' << row.episode << ',' << row.day << ','
              << row.episode_return << ',' << row.operational_cost_usd << '\n';
      detail::close_out(out, p);
    }
    if (evaluated > 0) {
      {
        auto p = report_dir / "action_histograms.csv";
        auto out = detail::open_out(p);
        out << "scenario,agent,axis,bin,lo,hi,count\n";
        for (const auto& r : runs)
          for (const auto& h : r.histogram)
            out << to_string(r.scenario) << ',' << r.agent << ',' << h.axis << ',' << h.bin << ',' << h.lo << ','
                << h.hi << ',' << h.count << '\n';
        detail::close_out(out, p);
      }
      {
        // One row per scenario: SAC when evaluated, else the first evaluated agent.
        auto p = report_dir / "cost_breakdown.csv";
        auto out = detail::open_out(p);
        out << "scenario,agent,operation_usd,degradation_usd,capital_amortized_usd,total_usd\n";
        for (auto id : kAllScenarios) {
          const RunArtifacts* pick = nullptr;
          for (const auto& r : runs)
            if (r.scenario == id && r.eval && (!pick || (r.agent == "sac" && pick->agent != "sac"))) pick = &r;
          if (!pick) continue;
          const auto& c = pick->eval->cost;
          out << to_string(id) << ',' << pick->agent << ',' << c.operation_usd << ',' << c.degradation_usd << ','
              << c.capital_amortized_usd << ',' << c.total_usd << '\n';
          summary << to_string(id) << " total cost (" << pick->agent << "): " << c.total_usd << " USD\n";
        }
        detail::close_out(out, p);
      }
      {
        auto p = report_dir / "comparison.csv";
        auto out = detail::open_out(p);
        out << "agent,scenario,episodes,mean_return,cash_cost_usd,soc_violations\n";
        for (const auto& agent : kAgentOrder)
          for (const auto& r : runs)
            if (r.agent == agent && r.eval)
              out << r.agent << ',' << to_string(r.scenario) << ',' << r.eval->episodes << ',' << r.eval->mean_return
                  << ',' << r.eval->cash_cost_usd << ',' << r.eval->soc_violations << '\n';
        detail::close_out(out, p);
      }
      for (auto id : kAllScenarios) {
        const EvalSummary* sac = nullptr;
        const EvalSummary* td3 = nullptr;
        for (const auto& r : runs)
          if (r.scenario == id && r.eval) {
            if (r.agent == "sac") sac = &*r.eval;
            if (r.agent == "td3") td3 = &*r.eval;
          }
        if (sac && td3)
          summary << to_string(id) << " mean return: sac " << sac->mean_return << ", td3 " << td3->mean_return << " ("
                  << (sac->mean_return >= td3->mean_return ? "sac" : "td3") << " higher)\n";
      }
    }
  }

  auto p = report_dir / "summary.txt";
  auto out = detail::open_out(p);
  out << summary.str();
  detail::close_out(out, p);
  return summary.str();
}

}  // namespace evcs
