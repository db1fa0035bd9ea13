#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evcs {

enum class DayType { Weekday, Weekend, Holiday };

inline std::string_view to_string(DayType d) {
  switch (d) {
    case DayType::Weekday: return "weekday";
    case DayType::Weekend: return "weekend";
    case DayType::Holiday: return "holiday";
  }
  return "?";
}

// Day 0 is a Monday. Holidays are day-of-year indices and repeat yearly.
struct Calendar {
  int days_per_year = 365;
  std::set<int> holidays{0, 147, 185, 245, 332, 359};

  DayType day_type(int day_index) const {
    int doy = ((day_index % days_per_year) + days_per_year) % days_per_year;
    if (holidays.count(doy)) return DayType::Holiday;
    int dow = ((day_index % 7) + 7) % 7;
    return dow >= 5 ? DayType::Weekend : DayType::Weekday;
  }
};

// Closed interval of peak intervals [start, end].
struct PeakWindow {
  int start = 15;
  int end = 18;
};

struct PriceSchedule {
  std::vector<double> weekday_usd_per_kwh;
  std::vector<double> weekend_usd_per_kwh;
  std::vector<double> holiday_usd_per_kwh;
  std::optional<PeakWindow> peak;
  // Peak shaping applies on weekends/holidays too when set.
  bool peak_every_day = false;
  Calendar calendar;

  int intervals() const { return static_cast<int>(weekday_usd_per_kwh.size()); }

  const std::vector<double>& prices_for(DayType d) const {
    switch (d) {
      case DayType::Weekend: return weekend_usd_per_kwh;
      case DayType::Holiday: return holiday_usd_per_kwh;
      default: return weekday_usd_per_kwh;
    }
  }

  const std::vector<double>& day_prices(int day_index) const { return prices_for(calendar.day_type(day_index)); }

  double price_at(int day_index, int t) const {
    const auto& p = day_prices(day_index);
    if (t < 0 || t >= static_cast<int>(p.size()))
      throw std::out_of_range("price_at: interval " + std::to_string(t) + " outside [0, " +
                              std::to_string(p.size()) + ")");
    return p[static_cast<std::size_t>(t)];
  }

  bool is_peak(int t) const { return peak && peak->start <= t && t <= peak->end; }

  bool is_peak(int day_index, int t) const {
    if (!is_peak(t)) return false;
    return peak_every_day || calendar.day_type(day_index) == DayType::Weekday;
  }

  // Price of an interval drawn uniformly from {t, ..., intervals-1} of the same day.
  template <class Rng>
  double future_price_sample(int day_index, int t, Rng& rng) const {
    const auto& p = day_prices(day_index);
    int n = static_cast<int>(p.size());
    if (t < 0 || t >= n) throw std::out_of_range("future_price_sample: interval out of range");
    std::uniform_int_distribution<int> pick(t, n - 1);
    return p[static_cast<std::size_t>(pick(rng))];
  }

  double min_price() const {
    double m = weekday_usd_per_kwh.front();
    for (auto* v : {&weekday_usd_per_kwh, &weekend_usd_per_kwh, &holiday_usd_per_kwh})
      m = std::min(m, *std::min_element(v->begin(), v->end()));
    return m;
  }

  double max_price() const {
    double m = weekday_usd_per_kwh.front();
    for (auto* v : {&weekday_usd_per_kwh, &weekend_usd_per_kwh, &holiday_usd_per_kwh})
      m = std::max(m, *std::max_element(v->begin(), v->end()));
    return m;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("market: " + what); };
    int n = intervals();
    if (n <= 0) fail("weekday price vector is empty");
    if (static_cast<int>(weekend_usd_per_kwh.size()) != n || static_cast<int>(holiday_usd_per_kwh.size()) != n)
      fail("every day type needs " + std::to_string(n) + " prices");
    for (auto* v : {&weekday_usd_per_kwh, &weekend_usd_per_kwh, &holiday_usd_per_kwh})
      for (double x : *v)
        if (!(x > 0)) fail("prices must be positive");
    if (peak && !(0 <= peak->start && peak->start <= peak->end && peak->end < n))
      fail("peak window must satisfy 0 <= start <= end < intervals");
    if (calendar.days_per_year <= 0) fail("days_per_year must be positive");
  }
};

inline PriceSchedule flat_schedule(double usd_per_kwh, int intervals = 24) {
  PriceSchedule s;
  s.weekday_usd_per_kwh.assign(static_cast<std::size_t>(intervals), usd_per_kwh);
  s.weekend_usd_per_kwh = s.weekday_usd_per_kwh;
  s.holiday_usd_per_kwh = s.weekday_usd_per_kwh;
  return s;
}

// Residential time-of-use shape: 0.11 $/kWh off-peak, 0.21 $/kWh from 15:00
// to 19:00 on weekdays; weekends and holidays are off-peak all day.
inline PriceSchedule default_schedule(int intervals = 24) {
  PriceSchedule s = flat_schedule(0.11, intervals);
  std::optional<PeakWindow> w;
  for (int t = 0; t < intervals; ++t) {
    double hour = t * 24.0 / intervals;
    if (hour < 15.0 || hour >= 19.0) continue;
    s.weekday_usd_per_kwh[static_cast<std::size_t>(t)] = 0.21;
    if (!w) w = PeakWindow{t, t};
    w->end = t;
  }
  s.peak = w;
  return s;
}

}  // namespace evcs
