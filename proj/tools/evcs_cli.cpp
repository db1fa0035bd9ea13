// Command-line front end: train, eval, oracle, report, profiles.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "evcs/config.hpp"
#include "evcs/experiment.hpp"

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> scenarios;
  std::vector<std::string> agents;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_agents) {
  cmd->add_option("-c,--config", c.config_path, "Experiment config (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override experiment.seed");
  cmd->add_option("--scenario", c.scenarios, "Only these scenarios (Fresh, SLB80, SLB60, SLB40)");
  if (with_agents) cmd->add_option("--agent", c.agents, "Only these agents (sac, td3, rule, random)");
  cmd->add_option("-o,--out", c.out, "Override experiment.output_dir");
}

evcs::ExperimentConfig resolve(const Common& c) {
  evcs::ExperimentConfig cfg = c.config_path.empty() ? evcs::ExperimentConfig{} : evcs::load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.scenarios.empty()) {
    cfg.scenarios.clear();
    for (const auto& s : c.scenarios) cfg.scenarios.push_back(evcs::scenario_from_string(s));
  }
  if (!c.agents.empty()) cfg.agents = c.agents;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EV charging station BESS scheduling experiments"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, oracle_opts, profile_opts;
  auto* train = app.add_subcommand("train", "Train SAC/TD3 agents for each scenario");
  add_common(train, train_opts, true);

  auto* eval = app.add_subcommand("eval", "Evaluate trained agents and baselines");
  add_common(eval, eval_opts, true);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Actor checkpoint to use instead of <out>/<scenario>/<agent>/actor.mlp");

  auto* oracle = app.add_subcommand("oracle", "Exact dynamic-programming optimum for one day");
  add_common(oracle, oracle_opts, false);
  int day = 1;
  int levels = evcs::kOracleMaxLevels;
  oracle->add_option("--day", day, "Calendar day index");
  oracle->add_option("--soc-levels", levels, "SOC grid size")->check(CLI::Range(2, evcs::kOracleMaxLevels));

  auto* report = app.add_subcommand("report", "Write report files from existing artifacts");
  std::string report_out = "runs";
  report->add_option("-o,--out", report_out, "Artifact directory");

  auto* profiles = app.add_subcommand("profiles", "Export generated EV load profiles as CSV");
  add_common(profiles, profile_opts, false);
  int n_days = 7;
  profiles->add_option("--days", n_days, "Number of days from experiment.first_day")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      auto cfg = resolve(train_opts);
      for (const auto& a : evcs::run_train(cfg))
        std::cout << "trained " << evcs::to_string(a.scenario) << '/' << a.agent << ": " << a.log.size()
                  << " episodes -> " << a.dir.string() << '\n';
    } else if (*eval) {
      auto cfg = resolve(eval_opts);
      std::optional<evcs::fs::path> ckpt;
      if (!checkpoint.empty()) ckpt = checkpoint;
      std::cout << std::setprecision(6);
      for (const auto& a : evcs::run_eval(cfg, ckpt))
        std::cout << evcs::to_string(a.scenario) << '/' << a.agent << ": mean return " << a.result.mean_return
                  << ", cash cost " << a.result.cash_cost_usd << " USD, soc violations " << a.result.soc_violations
                  << '\n';
      if (cfg.emit_reports) evcs::emit_reports(evcs::collect_artifacts(cfg.output_dir), evcs::fs::path(cfg.output_dir) / "reports");
    } else if (*oracle) {
      auto cfg = resolve(oracle_opts);
      for (auto id : cfg.scenarios) {
        auto run = evcs::run_oracle(cfg, id, day, levels);
        auto path = evcs::fs::path(cfg.output_dir) / std::string(evcs::to_string(id)) / "oracle" /
                    ("dispatch_day" + std::to_string(day) + ".csv");
        evcs::fs::create_directories(path.parent_path());
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        evcs::write_oracle_dispatch(out, run);
        std::cout << std::setprecision(10) << evcs::to_string(id) << " day " << day << ": optimal "
                  << run.result.optimal_cost_usd << " USD, grid only " << run.result.grid_only_cost_usd << " USD -> "
                  << path.string() << '\n';
      }
    } else if (*report) {
      std::cout << evcs::emit_reports(evcs::collect_artifacts(report_out), evcs::fs::path(report_out) / "reports");
    } else if (*profiles) {
      auto cfg = resolve(profile_opts);
      evcs::Environment env(cfg.env_for(cfg.scenarios.front()), cfg.seed);
      std::vector<evcs::LoadProfile> days;
      for (int d = 0; d < n_days; ++d) days.push_back(env.profile_for(cfg.first_day + d));
      evcs::write_profiles_csv(std::cout, days);
    }
  } catch (const evcs::ConfigError& e) {
    std::cerr << "config error at " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
