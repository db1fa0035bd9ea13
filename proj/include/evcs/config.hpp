#pragma once

// Experiment configuration read from a sectioned key-value (INI) file. Every
// key carries its unit in the name; unknown sections and keys are rejected
// with their full path.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evcs/agents.hpp"
#include "evcs/battery.hpp"
#include "evcs/env.hpp"

namespace evcs {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key_path, const std::string& what)
      : std::runtime_error(key_path + ": " + what), key_path_(key_path) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

struct ExperimentConfig {
  std::vector<ScenarioId> scenarios{kAllScenarios.begin(), kAllScenarios.end()};
  // Any of sac, td3, rule, random. Only sac and td3 are trained.
  std::vector<std::string> agents{"sac", "td3"};
  std::uint64_t seed = 1;
  std::uint64_t eval_seed = 1001;
  std::string output_dir = "runs";
  int calendar_days = 365;
  int first_day = 0;
  int eval_episodes = 20;
  int eval_first_day = 0;
  int checkpoint_every = 0;
  bool write_eval_trace = true;
  bool emit_reports = true;
  int histogram_bins = 20;

  // Template for every scenario; `battery` overrides fill in the per-scenario values.
  EnvConfig env = default_env_config();
  std::map<ScenarioId, BessScenarioSpec> battery;
  SacConfig sac;
  Td3Config td3;

  EnvConfig env_for(ScenarioId id) const {
    EnvConfig c = env;
    auto it = battery.find(id);
    c.scenario = it != battery.end() ? it->second : default_scenario(id);
    return c;
  }

  void validate() const {
    if (scenarios.empty()) throw ConfigError("experiment.scenarios", "at least one scenario is required");
    if (agents.empty()) throw ConfigError("experiment.agents", "at least one agent is required");
    for (const auto& a : agents)
      if (a != "sac" && a != "td3" && a != "rule" && a != "random")
        throw ConfigError("experiment.agents", "unknown agent '" + a + "'");
    if (calendar_days <= 0) throw ConfigError("experiment.calendar_days", "must be positive");
    if (eval_episodes < 0) throw ConfigError("experiment.eval_episodes", "must be non-negative");
    if (histogram_bins <= 0) throw ConfigError("experiment.histogram_bins", "must be positive");
    if (checkpoint_every < 0) throw ConfigError("experiment.checkpoint_every", "must be non-negative");
    for (auto id : scenarios) {
      try {
        env_for(id).validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("scenario.") + std::string(to_string(id)), e.what());
      }
    }
    try {
      sac.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("sac", e.what());
    }
    try {
      td3.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("td3", e.what());
    }
  }
};

namespace detail {

// One INI section; remembers which keys were read so leftovers can be reported.
class Section {
 public:
  Section(std::string name, const boost::property_tree::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  template <class T>
  std::optional<T> get(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    auto child = tree_->get_child_optional(boost::property_tree::ptree::path_type(key, '\0'));
    if (!child) return std::nullopt;
    auto value = child->get_value_optional<T>();
    if (!value) throw ConfigError(path(key), "cannot parse '" + child->data() + "'");
    return T(*value);
  }

  template <class T>
  void read(const std::string& key, T& target) {
    if (auto v = get<T>(key)) target = *v;
  }

  bool read_bool(const std::string& key, bool& target) {
    auto raw = get<std::string>(key);
    if (!raw) return false;
    if (*raw == "true" || *raw == "1" || *raw == "yes") target = true;
    else if (*raw == "false" || *raw == "0" || *raw == "no") target = false;
    else throw ConfigError(path(key), "expected true or false, got '" + *raw + "'");
    return true;
  }

  std::optional<std::vector<std::string>> list(const std::string& key) {
    auto raw = get<std::string>(key);
    if (!raw) return std::nullopt;
    std::vector<std::string> out;
    std::stringstream ss(*raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto b = item.find_first_not_of(" \t");
      auto e = item.find_last_not_of(" \t");
      if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
  }

  template <class T>
  std::optional<std::vector<T>> numbers(const std::string& key) {
    auto items = list(key);
    if (!items) return std::nullopt;
    std::vector<T> out;
    for (const auto& s : *items) {
      std::istringstream in(s);
      T v{};
      if (!(in >> v) || !in.eof()) throw ConfigError(path(key), "cannot parse list element '" + s + "'");
      out.push_back(v);
    }
    return out;
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_)
      if (!used_.count(key)) throw ConfigError(path(key), "unknown key");
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  const boost::property_tree::ptree* tree_;
  std::set<std::string> used_;
};

inline int hour_to_interval(double hour, int intervals, const std::string& key_path) {
  double x = hour * intervals / 24.0;
  if (std::abs(x - std::round(x)) > 1e-9 || x < 0 || x > intervals)
    throw ConfigError(key_path, "hour does not fall on an interval boundary inside the day");
  return static_cast<int>(std::lround(x));
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("<file>", e.message() + " at line " + std::to_string(e.line()));
  }

  static const std::set<std::string> kSections{"experiment", "env", "battery", "fleet", "market", "sac", "td3"};
  std::map<std::string, const pt::ptree*> scenario_sections;
  for (const auto& [name, child] : root) {
    if (kSections.count(name)) continue;
    if (name.rfind("scenario.", 0) == 0) {
      std::string id = name.substr(9);
      try {
        scenario_from_string(id);
      } catch (const std::invalid_argument&) {
        throw ConfigError(name, "unknown scenario '" + id + "'");
      }
      scenario_sections[id] = &child;
      continue;
    }
    throw ConfigError(name, "unknown section");
  }
  auto section = [&](const std::string& name) {
    auto it = root.find(name);
    return detail::Section(name, it == root.not_found() ? nullptr : &it->second);
  };

  ExperimentConfig cfg;

  auto ex = section("experiment");
  if (auto names = ex.list("scenarios")) {
    cfg.scenarios.clear();
    for (const auto& n : *names) {
      try {
        cfg.scenarios.push_back(scenario_from_string(n));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(ex.path("scenarios"), e.what());
      }
    }
  }
  if (auto names = ex.list("agents")) cfg.agents = *names;
  ex.read("seed", cfg.seed);
  ex.read("eval_seed", cfg.eval_seed);
  ex.read("output_dir", cfg.output_dir);
  ex.read("calendar_days", cfg.calendar_days);
  ex.read("first_day", cfg.first_day);
  ex.read("eval_episodes", cfg.eval_episodes);
  ex.read("eval_first_day", cfg.eval_first_day);
  ex.read("checkpoint_every", cfg.checkpoint_every);
  ex.read("histogram_bins", cfg.histogram_bins);
  ex.read_bool("write_eval_trace", cfg.write_eval_trace);
  ex.read_bool("emit_reports", cfg.emit_reports);
  ex.reject_unknown();

  auto env = section("env");
  int intervals = 24;
  env.read("intervals_per_day", intervals);
  if (intervals <= 0) throw ConfigError(env.path("intervals_per_day"), "must be positive");
  EnvConfig& e = cfg.env;
  e = default_env_config(ScenarioId::SLB80, intervals);

  auto fl = section("fleet");
  FleetSpec& f = e.fleet;
  fl.read("n_commercial", f.n_commercial);
  fl.read("n_private", f.n_private);
  if (auto m = fl.get<double>("median_km_commercial")) {
    if (!(*m > 0)) throw ConfigError(fl.path("median_km_commercial"), "must be positive");
    f.mu_com = std::log(*m);
  }
  if (auto m = fl.get<double>("median_km_private")) {
    if (!(*m > 0)) throw ConfigError(fl.path("median_km_private"), "must be positive");
    f.mu_pv = std::log(*m);
  }
  fl.read("sigma_ln_km_commercial", f.sigma_com);
  fl.read("sigma_ln_km_private", f.sigma_pv);
  fl.read("efficiency_km_per_kwh", f.lambda_ev_km_per_kwh);
  fl.read("charger_kw", f.charger_cap_kw);
  fl.read("weekend_commercial_factor", f.weekend_commercial_factor);
  auto window = [&](const std::string& prefix, ChargingWindow& w) {
    if (auto h = fl.get<double>(prefix + "_start_hour")) w.begin = detail::hour_to_interval(*h, intervals, fl.path(prefix + "_start_hour"));
    if (auto h = fl.get<double>(prefix + "_end_hour")) w.end = detail::hour_to_interval(*h, intervals, fl.path(prefix + "_end_hour"));
  };
  window("commercial_window", f.commercial_window);
  window("private_window", f.private_window);
  fl.reject_unknown();

  auto mk = section("market");
  PriceSchedule& s = e.schedule;
  double offpeak = 0.11, peak_price = 0.21, peak_start = 15.0, peak_end = 19.0;
  mk.read("offpeak_usd_per_kwh", offpeak);
  mk.read("peak_usd_per_kwh", peak_price);
  mk.read("peak_start_hour", peak_start);
  mk.read("peak_end_hour", peak_end);
  bool has_peak = true;
  mk.read_bool("has_peak_window", has_peak);
  {
    int a = detail::hour_to_interval(peak_start, intervals, mk.path("peak_start_hour"));
    int b = detail::hour_to_interval(peak_end, intervals, mk.path("peak_end_hour"));
    if (has_peak && b <= a) throw ConfigError(mk.path("peak_end_hour"), "must be after peak_start_hour");
    s = flat_schedule(offpeak, intervals);
    if (has_peak) {
      s.peak = PeakWindow{a, b - 1};
      for (int t = a; t < b; ++t) s.weekday_usd_per_kwh[static_cast<std::size_t>(t)] = peak_price;
    }
  }
  auto vector_override = [&](const std::string& key, std::vector<double>& target) {
    if (auto v = mk.numbers<double>(key)) {
      if (static_cast<int>(v->size()) != intervals)
        throw ConfigError(mk.path(key), "needs exactly " + std::to_string(intervals) + " values");
      target = *v;
    }
  };
  vector_override("weekday_usd_per_kwh", s.weekday_usd_per_kwh);
  vector_override("weekend_usd_per_kwh", s.weekend_usd_per_kwh);
  vector_override("holiday_usd_per_kwh", s.holiday_usd_per_kwh);
  mk.read_bool("peak_shaping_every_day", s.peak_every_day);
  mk.read("days_per_year", s.calendar.days_per_year);
  if (auto h = mk.numbers<int>("holidays_day_of_year")) s.calendar.holidays = std::set<int>(h->begin(), h->end());
  mk.reject_unknown();

  // Derived defaults depend on the fleet and calendar read above.
  e.p_threshold_kw = 0.6 * f.max_aggregate_kw();
  e.converter_cap_kw = f.max_aggregate_kw();
  e.horizon_days = cfg.calendar_days;
  env.read("p_threshold_kw", e.p_threshold_kw);
  env.read("converter_cap_kw", e.converter_cap_kw);
  env.read("horizon_days", e.horizon_days);
  env.read("service_life_days", e.service_life_days);
  if (auto soc = env.get<double>("initial_soc")) e.initial_soc = *soc;
  env.read_bool("track_soc_violations", e.track_soc_violations);
  env.reject_unknown();

  auto bt = section("battery");
  BessScenarioSpec shared = default_scenario(ScenarioId::Fresh);
  bt.read("nominal_capacity_kwh", shared.nominal_capacity_kwh);
  bt.read("price_per_kwh_usd", shared.price_per_kwh_usd);
  bt.read("eta_ch", shared.eta_ch);
  bt.read("eta_dis", shared.eta_dis);
  bt.read("soc_min", shared.soc_min);
  bt.read("soc_max", shared.soc_max);
  bt.read("eol_fraction", shared.eol_fraction);
  bt.reject_unknown();
  for (auto id : kAllScenarios) {
    BessScenarioSpec spec = default_scenario(id);
    BessScenarioSpec merged = shared;
    merged.scenario_id = id;
    merged.soh = spec.soh;
    merged.alpha_capital = spec.alpha_capital;
    merged.cycle_budget = spec.cycle_budget;
    std::string name(to_string(id));
    auto it = scenario_sections.find(name);
    detail::Section sc("scenario." + name, it == scenario_sections.end() ? nullptr : it->second);
    sc.read("soh", merged.soh);
    sc.read("alpha_capital", merged.alpha_capital);
    sc.read("cycle_budget", merged.cycle_budget);
    sc.reject_unknown();
    cfg.battery[id] = merged;
  }
  e.scenario = cfg.battery[ScenarioId::SLB80];

  auto hidden = [](detail::Section& sec, std::vector<int>& target) {
    if (auto h = sec.numbers<int>("hidden_units")) {
      for (int v : *h)
        if (v <= 0) throw ConfigError(sec.path("hidden_units"), "layer widths must be positive");
      target = *h;
    }
  };
  auto sa = section("sac");
  SacConfig& a = cfg.sac;
  sa.read("discount", a.discount);
  sa.read("tau", a.tau);
  sa.read("entropy_coef", a.entropy_coef);
  sa.read("batch_size", a.batch_size);
  sa.read("lr_actor", a.lr_actor);
  sa.read("lr_critic", a.lr_critic);
  sa.read("lr_value", a.lr_value);
  sa.read("updates_per_step", a.updates_per_step);
  sa.read("episodes", a.episodes);
  sa.read("warmup_transitions", a.warmup_transitions);
  sa.read("buffer_capacity", a.buffer_capacity);
  sa.read("reward_scale", a.reward_scale);
  sa.read("log_std_min", a.log_std_min);
  sa.read("log_std_max", a.log_std_max);
  hidden(sa, a.hidden);
  sa.reject_unknown();

  auto td = section("td3");
  Td3Config& t = cfg.td3;
  td.read("discount", t.discount);
  td.read("tau", t.tau);
  td.read("batch_size", t.batch_size);
  td.read("lr_actor", t.lr_actor);
  td.read("lr_critic", t.lr_critic);
  td.read("updates_per_step", t.updates_per_step);
  td.read("episodes", t.episodes);
  td.read("warmup_transitions", t.warmup_transitions);
  td.read("buffer_capacity", t.buffer_capacity);
  td.read("reward_scale", t.reward_scale);
  td.read("target_noise", t.target_noise);
  td.read("noise_clip", t.noise_clip);
  td.read("policy_delay", t.policy_delay);
  td.read("exploration_noise", t.exploration_noise);
  hidden(td, t.hidden);
  td.reject_unknown();

  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  return parse_config(in);
}

}  // namespace evcs
