#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "feederlab/csv.hpp"
#include "feederlab/domain.hpp"
#include "feederlab/rng.hpp"

namespace feederlab {

// Deterministic synthetic low-voltage grid: feeder metadata, weather,
// calendar and bottom-up ground-truth series. Component load shapes are
// fixed parametric templates; the generator is a test-oracle substrate,
// not a physical simulation.

struct CategorySpec {
  double prevalence = 0.0;  // fraction of feeders with the category present
  double lo = 0.0;          // magnitude range (kW, kWh/day or count)
  double hi = 0.0;
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  int n_feeders = 200;
  Date start = Date::from_ymd(2023, 1, 1);
  Date end = Date::from_ymd(2023, 5, 1);  // exclusive; default period is 120 days
  double noise_level = 0.12;              // lognormal sigma on consumption
  double gap_rate = 0.05;                 // fraction of indices dropped
  std::array<CategorySpec, FeederMetadata::kCategoryCount> categories{{
      {0.95, 2, 40},    // housing_units (count)
      {0.15, 5, 40},    // storage_heaters kW
      {0.35, 3, 30},    // heat_pumps kW
      {0.20, 2, 15},    // electric_heaters kW
      {0.40, 3, 40},    // ev_chargers kW
      {0.30, 2, 12},    // hot_water_tanks kW
      {0.10, 1, 10},    // inductive_power kW
      {0.08, 10, 35},   // flow_type_heaters kW: few feeders, high power
      {0.25, 0.5, 4},   // public_lighting kW
      {0.20, 1, 15},    // other_consumers kW
      {0.45, 1, 8},     // batteries kW: many feeders, low power
      {0.70, 5, 80},    // pv_systems kW: most common, highest installed power
      {0.08, 5, 30},    // other_producers kW
      {0.30, 5, 80},    // g0 kWh/day
      {0.35, 10, 400},  // g1: dominating commerce group
      {0.10, 5, 60},    // g2
      {0.15, 10, 150},  // g3
      {0.12, 5, 60},    // g4
      {0.05, 10, 80},   // g5
      {0.08, 5, 60},    // g6
      {0.10, 10, 120},  // l0
  }};

  void validate() const {
    if (n_feeders < 1) throw std::invalid_argument("n_feeders must be >= 1");
    if (end.days - start.days < 1)
      throw std::invalid_argument("generation period must cover at least 1 day");
    if (!(gap_rate >= 0.0 && gap_rate <= 0.5))
      throw std::invalid_argument("gap_rate must be in [0, 0.5]");
    if (noise_level < 0.0) throw std::invalid_argument("noise_level must be >= 0");
    for (const auto& c : categories)
      if (!(c.prevalence >= 0.0 && c.prevalence <= 1.0) || c.lo < 0.0 || c.hi < c.lo)
        throw std::invalid_argument("invalid category prevalence/magnitude spec");
  }

  TimeGrid grid() const {
    return TimeGrid{Timestamp::from(start),
                    static_cast<std::int64_t>(end.days - start.days) * kStepsPerDay};
  }
};

namespace detail_gen {

inline double season(int day_of_year) {  // -1 mid-winter .. +1 mid-summer
  return -std::cos(2.0 * std::numbers::pi * (day_of_year + 10) / 365.25);
}

inline bool in_window(int minute_of_day, int from_h, int to_h) {
  return minute_of_day >= from_h * 60 && minute_of_day < to_h * 60;
}

}  // namespace detail_gen

/// Seasonal sinusoid + diurnal cycle + autoregressive noise for temperature;
/// clear-sky bell scaled by a per-day cloud factor for radiation (exactly
/// zero at night); precipitation bursts and a snow accumulation recurrence.
inline WeatherSeries generate_weather(std::uint64_t seed, Date start, Date end) {
  if (end.days - start.days < 1)
    throw std::invalid_argument("weather period must cover at least 1 day");
  TimeGrid grid{Timestamp::from(start),
                static_cast<std::int64_t>(end.days - start.days) * kStepsPerDay};
  Rng rng = Rng(seed).fork(0x77656174686572ULL);

  const auto n_days = static_cast<std::size_t>(end.days - start.days);
  std::vector<double> day_anomaly(n_days), cloud_quality(n_days), wet_day(n_days);
  double anom = 0.0, cloud_ar = 0.0;
  for (std::size_t d = 0; d < n_days; ++d) {
    anom = 0.7 * anom + rng.normal(0.0, 2.2);
    day_anomaly[d] = anom;
    cloud_ar = 0.6 * cloud_ar + rng.normal(0.0, 0.35);
    cloud_quality[d] = std::clamp(0.62 + cloud_ar, 0.05, 1.0);
    wet_day[d] = rng.bernoulli(0.35) ? 1.0 : 0.0;
  }

  WeatherSeries w;
  w.grid = grid;
  const auto n = static_cast<std::size_t>(grid.n_steps());
  w.global_radiation.resize(n);
  w.air_temperature.resize(n);
  w.precipitation.resize(n);
  w.snow_height.resize(n);

  double temp_ar = 0.0, burst = 0.0, snow = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    Timestamp t = grid.index_to_timestamp(static_cast<std::int64_t>(j));
    int doy = t.date().day_of_year();
    int mod = t.minute_of_day();
    auto d = static_cast<std::size_t>(t.date().days - start.days);
    double s = detail_gen::season(doy);

    temp_ar = 0.98 * temp_ar + rng.normal(0.0, 0.25);
    double temp = 9.0 + 10.0 * s +
                  3.0 * std::cos(2.0 * std::numbers::pi * (mod - 870) / 1440.0) +
                  day_anomaly[d] + temp_ar;
    w.air_temperature[j] = temp;

    double half_width = 330.0 + 150.0 * s;  // minutes of daylight each side of noon
    double peak = 550.0 + 270.0 * s;        // clear-sky noon W/m^2
    double dist = std::abs(mod - 720);
    double clear = dist < half_width
                       ? peak * std::pow(std::cos(0.5 * std::numbers::pi * dist / half_width), 1.3)
                       : 0.0;
    w.global_radiation[j] = clear * cloud_quality[d];

    burst = 0.9 * burst + rng.normal(0.0, 0.45);
    double precip = wet_day[d] > 0 && burst > 0.3 ? (burst - 0.3) * 1.2 : 0.0;
    w.precipitation[j] = precip;

    if (temp < 0.0 && precip > 0.0) snow += 0.8 * precip;
    if (temp > 0.0) snow -= 0.05 * temp;
    snow = std::clamp(snow, 0.0, 60.0);
    w.snow_height[j] = snow;
  }
  return w;
}

/// Synthetic holiday list (fixed month/day dates) with Mon-Fri workdays.
inline Calendar generate_calendar(Date start, Date end) {
  static constexpr std::array<std::pair<unsigned, unsigned>, 7> holidays = {
      {{1, 1}, {1, 6}, {4, 7}, {5, 1}, {10, 3}, {12, 25}, {12, 26}}};
  std::vector<CalendarDay> days;
  for (Date d = start; d < end; d = d.next()) {
    auto ymd = d.ymd();
    bool holiday = false;
    for (auto [m, dd] : holidays)
      if (static_cast<unsigned>(ymd.month()) == m && static_cast<unsigned>(ymd.day()) == dd)
        holiday = true;
    bool workday = !holiday && d.weekday() < 5;
    days.push_back(CalendarDay{d, holiday, workday});
  }
  return Calendar(std::move(days));
}

inline FeederMetadata draw_metadata(const GeneratorConfig& cfg, Rng rng) {
  std::array<double, FeederMetadata::kCategoryCount> a{};
  for (int c = 0; c < FeederMetadata::kCategoryCount; ++c) {
    const auto& spec = cfg.categories[static_cast<std::size_t>(c)];
    bool present = rng.bernoulli(spec.prevalence);
    double magnitude = rng.uniform(spec.lo, spec.hi);
    if (!present) continue;
    if (c == 0)
      a[0] = std::floor(magnitude);  // housing_units is a count
    else
      a[static_cast<std::size_t>(c)] = std::round(magnitude * 10.0) / 10.0;
  }
  return FeederMetadata::from_array(a);
}

/// Bottom-up ground truth for one feeder: the sum of component templates plus
/// multiplicative lognormal noise on the consumption side. Producer output is
/// deterministic, which keeps the feed-in bound
///   min(series) >= -(pv_systems + other_producers + batteries)
/// provable. The RNG draw sequence depends only on the grid length, never on
/// metadata magnitudes, so responses are monotone in the installed powers.
inline std::vector<double> synthesize_ground_truth(const FeederMetadata& meta,
                                                   const WeatherSeries& weather,
                                                   const Calendar& calendar, Rng rng,
                                                   double noise_level) {
  const TimeGrid& grid = weather.grid;
  const auto n = static_cast<std::size_t>(grid.n_steps());
  auto days = day_partition(grid);

  // Unconditional per-day draws (EV charging event and flow-heater spikes).
  struct DayDraw {
    bool ev_on;
    double ev_start_min, ev_duration_min, ev_power_frac;
    std::array<double, 6> spike_start_min;
    std::array<double, 6> spike_power_frac;
  };
  std::vector<DayDraw> draws(days.size());
  for (auto& d : draws) {
    d.ev_on = rng.bernoulli(0.55);
    d.ev_start_min = rng.uniform(16 * 60, 21 * 60);
    d.ev_duration_min = rng.uniform(90, 240);
    d.ev_power_frac = rng.uniform(0.25, 0.7);
    for (int s = 0; s < 6; ++s) {
      d.spike_start_min[static_cast<std::size_t>(s)] = rng.uniform(5 * 60, 23 * 60);
      d.spike_power_frac[static_cast<std::size_t>(s)] = rng.uniform(0.5, 0.9);
    }
  }

  std::vector<double> day_mean_temp(days.size(), 0.0);
  for (std::size_t di = 0; di < days.size(); ++di) {
    const auto& span = days[di];
    double sum = 0.0;
    for (std::int64_t j = span.first; j < span.first + span.count; ++j)
      sum += weather.air_temperature[static_cast<std::size_t>(j)];
    day_mean_temp[di] = sum / static_cast<double>(span.count);
  }

  std::vector<double> out(n, 0.0);
  double soc_kwh = 0.0;
  const double battery_capacity_kwh = meta.batteries * 2.0;
  std::size_t di = 0;
  for (std::size_t j = 0; j < n; ++j) {
    auto ji = static_cast<std::int64_t>(j);
    if (ji >= days[di].first + days[di].count) ++di;
    Timestamp t = grid.index_to_timestamp(ji);
    int mod = t.minute_of_day();
    const CalendarDay* cal = calendar.find(t.date());
    bool workday = cal ? cal->is_workday : t.date().weekday() < 5;
    bool saturday = t.date().weekday() == 5;
    double temp = weather.air_temperature[j];
    double rad = weather.global_radiation[j];
    const DayDraw& dd = draws[di];

    double cons = 0.0;

    // households: evening-peaked base profile per unit, mild cold uplift
    {
      double shape = 0.12;
      if (detail_gen::in_window(mod, 6, 9)) shape = 0.35;
      else if (detail_gen::in_window(mod, 9, 17)) shape = workday ? 0.22 : 0.30;
      else if (detail_gen::in_window(mod, 17, 21)) shape = 0.55;
      else if (detail_gen::in_window(mod, 21, 24)) shape = 0.25;
      cons += meta.housing_units * shape * (1.0 + 0.012 * std::max(0.0, 12.0 - temp));
    }

    // heat pumps and resistive heaters ramp up as temperature falls
    cons += meta.heat_pumps * std::clamp((15.0 - temp) / 25.0, 0.0, 0.85) *
            (detail_gen::in_window(mod, 23, 24) || mod < 5 * 60 ? 0.75 : 1.0);
    cons += meta.electric_heaters * std::clamp((10.0 - temp) / 25.0, 0.0, 0.8) *
            (detail_gen::in_window(mod, 6, 22) ? 1.0 : 0.6);

    // storage heaters: block charge after midnight on cold days, peak first
    if (day_mean_temp[di] < 10.0 && mod < 6 * 60) {
      double fill = std::clamp((10.0 - day_mean_temp[di]) / 15.0, 0.2, 1.0);
      cons += meta.storage_heaters * fill * (1.0 - 0.4 * mod / 360.0);
    }

    if (dd.ev_on && mod >= dd.ev_start_min && mod < dd.ev_start_min + dd.ev_duration_min)
      cons += meta.ev_chargers * dd.ev_power_frac;

    if (detail_gen::in_window(mod, 6, 8) || detail_gen::in_window(mod, 18, 21))
      cons += meta.hot_water_tanks * 0.45;

    if (workday && detail_gen::in_window(mod, 7, 18)) cons += meta.inductive_power * 0.5;

    for (int s = 0; s < 6; ++s)
      if (mod >= dd.spike_start_min[static_cast<std::size_t>(s)] &&
          mod < dd.spike_start_min[static_cast<std::size_t>(s)] + kStepMinutes)
        cons += meta.flow_type_heaters * dd.spike_power_frac[static_cast<std::size_t>(s)];

    if (rad < 5.0) cons += meta.public_lighting * 0.95;

    cons += meta.other_consumers *
            (0.2 + 0.1 * std::sin(2.0 * std::numbers::pi * (mod - 840) / 1440.0));

    // commerce and industry, kWh/day scaled to kW with group-typical shapes
    {
      auto win = [&](int a, int b) { return detail_gen::in_window(mod, a, b) ? 1.0 : 0.0; };
      double holiday = cal && cal->is_holiday ? 1.0 : 0.0;
      cons += meta.g0 / 24.0 * (0.45 + 1.1 * win(8, 20));
      cons += meta.g1 / 24.0 * (workday ? 0.25 + 1.9 * win(8, 18) : 0.25);
      cons += meta.g2 / 24.0 * (0.35 + 1.7 * win(17, 23));
      cons += meta.g3 / 24.0;
      cons += meta.g4 / 24.0 * ((workday || saturday) ? 0.3 + 1.5 * win(9, 20) : 0.3);
      cons += meta.g5 / 24.0 * (0.35 + 2.6 * win(3, 10));
      cons += meta.g6 / 24.0 * ((!workday || holiday > 0) ? 0.35 + 1.8 * win(9, 22) : 0.35);
      cons += meta.l0 / 24.0 * (0.5 + 1.3 * (win(5, 9) + win(16, 20)));
    }

    cons *= rng.lognormal_unit(noise_level);

    // producers: deterministic envelopes, no noise
    double prod = -meta.pv_systems * 0.92 * rad / 1000.0;
    prod -= meta.other_producers * 0.65 * std::clamp((14.0 - temp) / 20.0, 0.0, 0.9);

    double net = cons + prod;

    // battery: charge from feed-in surplus, discharge to shave consumption
    if (meta.batteries > 0.0) {
      constexpr double step_h = kStepMinutes / 60.0;
      if (net < -0.5 && soc_kwh < battery_capacity_kwh) {
        double p = std::min({meta.batteries, -net - 0.5,
                             (battery_capacity_kwh - soc_kwh) / step_h});
        net += p;
        soc_kwh += p * step_h;
      } else if (net > 0.5 && soc_kwh > 0.0) {
        double p = std::min({meta.batteries, net - 0.5, soc_kwh / step_h});
        net -= p;
        soc_kwh -= p * step_h;
      }
    }
    out[j] = net;
  }
  return out;
}

/// Full synthetic dataset; every feeder is independently seeded from
/// seed and its index, so regeneration is order-independent.
inline csv::Dataset generate_dataset(const GeneratorConfig& cfg) {
  cfg.validate();
  csv::Dataset ds;
  ds.weather = generate_weather(cfg.seed, cfg.start, cfg.end);
  ds.calendar = generate_calendar(cfg.start, cfg.end);
  Rng root(cfg.seed);

  int width = cfg.n_feeders > 9999 ? 6 : 4;
  for (int i = 0; i < cfg.n_feeders; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "F%0*d", width, i + 1);
    auto fi = static_cast<std::uint64_t>(i);
    FeederMetadata meta = draw_metadata(cfg, root.fork(fi * 4 + 1));
    auto truth = synthesize_ground_truth(meta, ds.weather, ds.calendar, root.fork(fi * 4 + 2),
                                         cfg.noise_level);
    Rng gap_rng = root.fork(fi * 4 + 3);

    MeasurementSeries series;
    series.feeder_id = id;
    series.grid = ds.weather.grid;
    series.values.resize(truth.size());
    for (std::size_t j = 0; j < truth.size(); ++j) {
      bool gap = gap_rng.bernoulli(cfg.gap_rate);
      if (!gap) series.values[j] = truth[j];
    }
    ds.metadata.emplace(id, meta);
    ds.measurements.push_back(std::move(series));
  }
  return ds;
}

inline nlohmann::json generator_config_to_json(const GeneratorConfig& cfg) {
  nlohmann::json cats = nlohmann::json::array();
  for (int c = 0; c < FeederMetadata::kCategoryCount; ++c) {
    const auto& s = cfg.categories[static_cast<std::size_t>(c)];
    cats.push_back({{"category", FeederMetadata::category_names()[static_cast<std::size_t>(c)]},
                    {"prevalence", s.prevalence},
                    {"lo", s.lo},
                    {"hi", s.hi}});
  }
  return nlohmann::json{{"seed", cfg.seed},
                        {"n_feeders", cfg.n_feeders},
                        {"start_date", cfg.start.to_string()},
                        {"end_date", cfg.end.to_string()},
                        {"noise_level", cfg.noise_level},
                        {"gap_rate", cfg.gap_rate},
                        {"categories", std::move(cats)}};
}

}  // namespace feederlab
