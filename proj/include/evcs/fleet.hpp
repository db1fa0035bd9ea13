#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "evcs/market.hpp"

namespace evcs {

enum class EvClass { Commercial, Private };

// Half-open range of interval indices [begin, end).
struct ChargingWindow {
  int begin = 0;
  int end = 0;
  int length() const { return end - begin; }
  bool contains(int t) const { return begin <= t && t < end; }
};

struct FleetSpec {
  int n_commercial = 20;
  int n_private = 30;
  // Lognormal parameters of daily mileage (km), natural-log scale.
  double mu_com = std::log(80.0);
  double sigma_com = 0.4;
  double mu_pv = std::log(40.0);
  double sigma_pv = 0.5;
  double lambda_ev_km_per_kwh = 6.0;
  double charger_cap_kw = 11.0;
  ChargingWindow commercial_window{8, 18};
  ChargingWindow private_window{18, 22};
  double weekend_commercial_factor = 0.5;

  int n_ev() const { return n_commercial + n_private; }
  double max_aggregate_kw() const { return n_ev() * charger_cap_kw; }

  void validate(int intervals) const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("fleet: " + what); };
    if (n_commercial < 0 || n_private < 0) fail("EV counts must be non-negative");
    if (!(sigma_com > 0 && sigma_pv > 0)) fail("sigma must be positive");
    if (!(lambda_ev_km_per_kwh > 0)) fail("lambda_ev_km_per_kwh must be positive");
    if (!(charger_cap_kw > 0)) fail("charger_cap_kw must be positive");
    if (!(weekend_commercial_factor >= 0)) fail("weekend_commercial_factor must be non-negative");
    for (auto w : {commercial_window, private_window})
      if (!(0 <= w.begin && w.begin < w.end && w.end <= intervals))
        fail("charging windows must be non-empty and inside the day");
  }
};

// Default windows (08:00-18:00 commercial, 18:00-22:00 private) expressed
// in intervals of a day split into `intervals` slots.
inline FleetSpec default_fleet(int intervals = 24) {
  FleetSpec f;
  auto at = [intervals](int hour) { return hour * intervals / 24; };
  f.commercial_window = {at(8), at(18)};
  f.private_window = {at(18), at(22)};
  return f;
}

inline double lognormal_pdf(double x, double mu, double sigma) {
  if (x <= 0) return 0.0;
  double z = (std::log(x) - mu) / sigma;
  return std::exp(-0.5 * z * z) / (x * sigma * std::sqrt(2.0 * std::numbers::pi));
}

template <class Rng>
double sample_daily_mileage(const FleetSpec& fleet, EvClass cls, DayType day, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double z = normal(rng);
  if (cls == EvClass::Commercial) {
    double km = std::exp(fleet.mu_com + fleet.sigma_com * z);
    return day == DayType::Weekday ? km : km * fleet.weekend_commercial_factor;
  }
  return std::exp(fleet.mu_pv + fleet.sigma_pv * z);
}

inline double daily_energy_need(double mileage_km, double lambda_ev_km_per_kwh) {
  return mileage_km / lambda_ev_km_per_kwh;
}

struct LoadProfile {
  int day_index = 0;
  std::vector<double> kw_per_interval;
  // EVs whose need exceeded what a single in-window session can deliver.
  int clamped_evs = 0;
  // Energy actually scheduled, after clamping.
  double served_kwh = 0.0;
};

// Places one contiguous session of `energy_kwh` at `cap_kw` into `window`,
// last interval partial. Returns the energy placed.
template <class Rng>
double place_session(std::vector<double>& kw, ChargingWindow window, double energy_kwh, double cap_kw,
                     double dt_hours, Rng& rng, bool& clamped) {
  double per_interval = cap_kw * dt_hours;
  double window_energy = per_interval * window.length();
  clamped = energy_kwh > window_energy;
  if (clamped) energy_kwh = window_energy;
  if (energy_kwh <= 0) return 0.0;
  int full = static_cast<int>(std::floor(energy_kwh / per_interval));
  double rest = energy_kwh - full * per_interval;
  if (full >= window.length()) {
    full = window.length();
    rest = 0.0;
  }
  int len = full + (rest > 0 ? 1 : 0);
  std::uniform_int_distribution<int> pick(window.begin, window.end - len);
  int start = pick(rng);
  for (int i = 0; i < full; ++i) kw[static_cast<std::size_t>(start + i)] += cap_kw;
  if (rest > 0) kw[static_cast<std::size_t>(start + full)] += rest / dt_hours;
  return energy_kwh;
}

template <class Rng>
LoadProfile build_load_profile(const FleetSpec& fleet, int day_index, DayType day, int intervals,
                               double dt_hours, Rng& rng) {
  LoadProfile p;
  p.day_index = day_index;
  p.kw_per_interval.assign(static_cast<std::size_t>(intervals), 0.0);
  auto add = [&](EvClass cls, int count, ChargingWindow window) {
    for (int k = 0; k < count; ++k) {
      double km = sample_daily_mileage(fleet, cls, day, rng);
      double need = daily_energy_need(km, fleet.lambda_ev_km_per_kwh);
      bool clamped = false;
      p.served_kwh += place_session(p.kw_per_interval, window, need, fleet.charger_cap_kw, dt_hours, rng, clamped);
      p.clamped_evs += clamped ? 1 : 0;
    }
  };
  add(EvClass::Commercial, fleet.n_commercial, fleet.commercial_window);
  add(EvClass::Private, fleet.n_private, fleet.private_window);
  return p;
}

inline void write_profiles_csv(std::ostream& out, const std::vector<LoadProfile>& profiles) {
  out << "day,interval,kw\n";
  for (const auto& p : profiles)
    for (std::size_t t = 0; t < p.kw_per_interval.size(); ++t)
      out << p.day_index << ',' << t << ',' << p.kw_per_interval[t] << '\n';
}

}  // namespace evcs
