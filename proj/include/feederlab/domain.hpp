#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feederlab/time.hpp"

namespace feederlab {

/// Regular 15-minute time axis. Index j maps to start + j*15min.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(Timestamp start, std::int64_t n_steps) : start_(start), n_steps_(n_steps) {
    if (n_steps < 1) throw std::invalid_argument("TimeGrid needs at least one step");
  }

  Timestamp start() const { return start_; }
  std::int64_t n_steps() const { return n_steps_; }

  bool operator==(const TimeGrid& other) const = default;

  Timestamp index_to_timestamp(std::int64_t j) const {
    if (j < 0 || j >= n_steps_)
      throw std::out_of_range("grid index " + std::to_string(j) + " out of range");
    return start_.plus_minutes(j * kStepMinutes);
  }

  std::int64_t timestamp_to_index(Timestamp t) const {
    std::int64_t delta = t.minutes - start_.minutes;
    if (delta % kStepMinutes != 0)
      throw std::invalid_argument("timestamp " + t.to_string() + " not on the 15-minute grid");
    std::int64_t j = delta / kStepMinutes;
    if (j < 0 || j >= n_steps_)
      throw std::out_of_range("timestamp " + t.to_string() + " outside the grid");
    return j;
  }

  bool contains(Timestamp t) const {
    std::int64_t delta = t.minutes - start_.minutes;
    return delta >= 0 && delta % kStepMinutes == 0 && delta / kStepMinutes < n_steps_;
  }

 private:
  Timestamp start_;
  std::int64_t n_steps_ = 0;
};

/// Contiguous index range of one calendar day within a grid.
struct DaySpan {
  Date date;
  std::int64_t first = 0;  // first grid index of the day
  std::int64_t count = 0;
  bool partial = false;    // fewer than 96 slots fall on this day
};

/// Partitions grid indices into calendar days. Spans are disjoint, ordered,
/// and cover every index; partial first/last days are flagged.
inline std::vector<DaySpan> day_partition(const TimeGrid& grid) {
  std::vector<DaySpan> out;
  std::int64_t j = 0;
  while (j < grid.n_steps()) {
    Date day = grid.index_to_timestamp(j).date();
    Timestamp next_midnight = Timestamp::from(day.next());
    std::int64_t remaining_min = next_midnight.minutes - grid.index_to_timestamp(j).minutes;
    std::int64_t span = (remaining_min + kStepMinutes - 1) / kStepMinutes;
    if (j + span > grid.n_steps()) span = grid.n_steps() - j;
    out.push_back(DaySpan{day, j, span, span < kStepsPerDay});
    j += span;
  }
  return out;
}

/// The 21 metadata categories of a feeder: connection-point count, installed
/// equipment power (kW) and billing-derived daily energy (kWh).
struct FeederMetadata {
  double housing_units = 0;     // count of housing units (integer-valued)
  double storage_heaters = 0;   // kW installed
  double heat_pumps = 0;        // kW
  double electric_heaters = 0;  // kW
  double ev_chargers = 0;       // kW
  double hot_water_tanks = 0;   // kW
  double inductive_power = 0;   // kW
  double flow_type_heaters = 0; // kW
  double public_lighting = 0;   // kW
  double other_consumers = 0;   // kW
  double batteries = 0;         // kW
  double pv_systems = 0;        // kW
  double other_producers = 0;   // kW
  double g0 = 0;                // kWh per day, commerce general
  double g1 = 0;                // kWh, workday industry
  double g2 = 0;                // kWh, evening
  double g3 = 0;                // kWh, continuous
  double g4 = 0;                // kWh, shop
  double g5 = 0;                // kWh, bakery
  double g6 = 0;                // kWh, weekend
  double l0 = 0;                // kWh, farm

  static constexpr int kCategoryCount = 21;

  static const std::array<const char*, kCategoryCount>& category_names() {
    static const std::array<const char*, kCategoryCount> names = {
        "housing_units",  "storage_heaters", "heat_pumps",     "electric_heaters",
        "ev_chargers",    "hot_water_tanks", "inductive_power", "flow_type_heaters",
        "public_lighting", "other_consumers", "batteries",      "pv_systems",
        "other_producers", "g0", "g1", "g2", "g3", "g4", "g5", "g6", "l0"};
    return names;
  }

  std::array<double, kCategoryCount> as_array() const {
    return {housing_units,  storage_heaters, heat_pumps,     electric_heaters,
            ev_chargers,    hot_water_tanks, inductive_power, flow_type_heaters,
            public_lighting, other_consumers, batteries,      pv_systems,
            other_producers, g0, g1, g2, g3, g4, g5, g6, l0};
  }

  static FeederMetadata from_array(const std::array<double, kCategoryCount>& a) {
    FeederMetadata m;
    m.housing_units = a[0];  m.storage_heaters = a[1]; m.heat_pumps = a[2];
    m.electric_heaters = a[3]; m.ev_chargers = a[4];   m.hot_water_tanks = a[5];
    m.inductive_power = a[6]; m.flow_type_heaters = a[7]; m.public_lighting = a[8];
    m.other_consumers = a[9]; m.batteries = a[10];     m.pv_systems = a[11];
    m.other_producers = a[12];
    m.g0 = a[13]; m.g1 = a[14]; m.g2 = a[15]; m.g3 = a[16];
    m.g4 = a[17]; m.g5 = a[18]; m.g6 = a[19]; m.l0 = a[20];
    return m;
  }

  void validate() const {
    for (double v : as_array())
      if (!(v >= 0.0)) throw std::invalid_argument("metadata values must be >= 0 and finite");
    if (housing_units != std::floor(housing_units))
      throw std::invalid_argument("housing_units must be an integer");
  }

  bool all_zero() const {
    for (double v : as_array())
      if (v != 0.0) return false;
    return true;
  }

  /// Installed power that can physically feed into the grid. Batteries count:
  /// a discharging battery is indistinguishable from a producer at the feeder.
  double producer_power_kw() const { return pv_systems + other_producers + batteries; }
};

/// Active-power series of one feeder on the 15-minute grid, kW.
/// Absent values are measuring gaps; negative values are net feed-in.
struct MeasurementSeries {
  std::string feeder_id;
  TimeGrid grid;
  std::vector<std::optional<double>> values;  // one slot per grid index

  void validate() const {
    if (static_cast<std::int64_t>(values.size()) != grid.n_steps())
      throw std::invalid_argument("measurement series length does not match grid");
  }

  /// N_i: indices with a present value.
  std::vector<std::int64_t> present_indices() const {
    std::vector<std::int64_t> out;
    for (std::size_t j = 0; j < values.size(); ++j)
      if (values[j].has_value()) out.push_back(static_cast<std::int64_t>(j));
    return out;
  }

  std::int64_t n_present() const {
    std::int64_t n = 0;
    for (const auto& v : values) n += v.has_value();
    return n;
  }
};

/// Gap-free weather series shared by all feeders of a dataset.
struct WeatherSeries {
  TimeGrid grid;
  std::vector<double> global_radiation;  // W/m^2
  std::vector<double> air_temperature;   // degC
  std::vector<double> precipitation;     // mm
  std::vector<double> snow_height;       // cm

  void validate() const {
    auto n = static_cast<std::size_t>(grid.n_steps());
    if (global_radiation.size() != n || air_temperature.size() != n ||
        precipitation.size() != n || snow_height.size() != n)
      throw std::invalid_argument("weather series length does not match grid");
    for (std::size_t j = 0; j < n; ++j) {
      if (global_radiation[j] < 0 || precipitation[j] < 0 || snow_height[j] < 0)
        throw std::invalid_argument("radiation, precipitation and snow height must be >= 0");
    }
  }
};

struct CalendarDay {
  Date date;
  bool is_holiday = false;
  bool is_workday = false;
};

/// Per-day holiday/workday flags with date lookup.
class Calendar {
 public:
  Calendar() = default;
  explicit Calendar(std::vector<CalendarDay> days) : days_(std::move(days)) {
    for (std::size_t i = 0; i < days_.size(); ++i) {
      const auto& d = days_[i];
      if (d.is_holiday && d.is_workday)
        throw std::invalid_argument("a day cannot be both holiday and workday: " +
                                    d.date.to_string());
      by_date_[d.date.days] = i;
    }
  }

  const std::vector<CalendarDay>& days() const { return days_; }

  const CalendarDay* find(Date date) const {
    auto it = by_date_.find(date.days);
    return it == by_date_.end() ? nullptr : &days_[it->second];
  }

 private:
  std::vector<CalendarDay> days_;
  std::map<std::int32_t, std::size_t> by_date_;
};

// Model input layout: 21 metadata, 4 weather, 6 timestamp encoding,
// 2 calendar flags.
inline constexpr int kMetadataDim = FeederMetadata::kCategoryCount;
inline constexpr int kWeatherDim = 4;
inline constexpr int kTimeEncodingDim = 6;
inline constexpr int kCalendarDim = 2;
inline constexpr int kFeatureDim = kMetadataDim + kWeatherDim + kTimeEncodingDim + kCalendarDim;
inline constexpr int kWeatherOffset = kMetadataDim;
inline constexpr int kTimeOffset = kWeatherOffset + kWeatherDim;
inline constexpr int kCalendarOffset = kTimeOffset + kTimeEncodingDim;

using FeatureRow = std::array<double, kFeatureDim>;

/// One model training/prediction sample: features with the aligned target.
struct Sample {
  std::string feeder_id;
  std::int64_t index = 0;  // grid index
  FeatureRow features{};
  double target_kw = 0.0;
};

}  // namespace feederlab
