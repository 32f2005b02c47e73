#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "feederlab/csv.hpp"
#include "feederlab/domain.hpp"

namespace feederlab {

// ---- 15-minute aggregation ----------------------------------------------

/// Minute-resolution raw series; absent slots are missing raw values.
struct MinuteSeries {
  std::string feeder_id;
  Timestamp start;  // minute-aligned
  std::vector<std::optional<double>> values;
};

/// Mean-aggregates a minute series onto the 15-minute grid. Bins without any
/// present raw value become gaps. Bins are aligned to :00/:15/:30/:45.
inline MeasurementSeries aggregate_to_15min(const MinuteSeries& raw) {
  if (raw.values.empty()) throw std::invalid_argument("empty raw series");
  std::int64_t first_bin = detail::floor_div(raw.start.minutes, kStepMinutes);
  std::int64_t last_minute = raw.start.minutes + static_cast<std::int64_t>(raw.values.size()) - 1;
  std::int64_t last_bin = detail::floor_div(last_minute, kStepMinutes);

  MeasurementSeries out;
  out.feeder_id = raw.feeder_id;
  out.grid = TimeGrid{Timestamp{first_bin * kStepMinutes}, last_bin - first_bin + 1};
  out.values.assign(static_cast<std::size_t>(out.grid.n_steps()), std::nullopt);

  std::vector<double> sums(out.values.size(), 0.0);
  std::vector<int> counts(out.values.size(), 0);
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    if (!raw.values[i]) continue;
    std::int64_t minute = raw.start.minutes + static_cast<std::int64_t>(i);
    auto bin = static_cast<std::size_t>(detail::floor_div(minute, kStepMinutes) - first_bin);
    sums[bin] += *raw.values[i];
    counts[bin] += 1;
  }
  for (std::size_t b = 0; b < sums.size(); ++b)
    if (counts[b] > 0) out.values[b] = sums[b] / counts[b];
  return out;
}

// ---- plausibility filters ------------------------------------------------

enum class CleaningRule {
  kMinMeasurements,   // (a) at least one day (96 values) of measurements
  kAmplitude,         // (b) |y| must exceed 5 kW at least once
  kPhysicalLimit,     // (c) single category above the feeder physical limit
  kNoMetadata,        // (d) metadata all zero or missing
  kFeedInExceedsProducers,  // (e) feed-in beyond installed producer power + 5 kW
  kNightFeedInPvOnly, // (f) feed-in between 00:00 and 02:00 with PV as only producer
};

inline const char* cleaning_rule_id(CleaningRule r) {
  switch (r) {
    case CleaningRule::kMinMeasurements: return "a_min_measurements";
    case CleaningRule::kAmplitude: return "b_amplitude";
    case CleaningRule::kPhysicalLimit: return "c_physical_limit";
    case CleaningRule::kNoMetadata: return "d_no_metadata";
    case CleaningRule::kFeedInExceedsProducers: return "e_feed_in_exceeds_producers";
    case CleaningRule::kNightFeedInPvOnly: return "f_night_feed_in_pv_only";
  }
  return "?";
}

struct CleaningConfig {
  // The paper names the physical-limit rule without a number; 400 kW per
  // category matches typical LV feeder ampacity.
  double physical_limit_kw = 400.0;
  double amplitude_threshold_kw = 5.0;
  double feed_in_margin_kw = 5.0;
  std::int64_t min_present = kStepsPerDay;
};

struct CleaningVerdict {
  std::string feeder_id;
  bool kept = false;
  std::optional<CleaningRule> failed_rule;  // first failing rule
};

struct CleaningReport {
  std::vector<CleaningVerdict> verdicts;          // one per input feeder
  std::map<std::string, std::int64_t> removed_by_rule;

  std::int64_t kept_count() const {
    std::int64_t n = 0;
    for (const auto& v : verdicts) n += v.kept;
    return n;
  }
};

namespace detail_prep {

inline std::optional<CleaningRule> first_failed_rule(const FeederMetadata* meta,
                                                     const MeasurementSeries* series,
                                                     const CleaningConfig& cfg) {
  // (a) at least one day of measurements
  if (!series || series->n_present() < cfg.min_present) return CleaningRule::kMinMeasurements;

  // (b) must exceed +-5 kW at least once
  double max_abs = 0.0, min_val = 0.0;
  for (const auto& v : series->values) {
    if (!v) continue;
    max_abs = std::max(max_abs, std::abs(*v));
    min_val = std::min(min_val, *v);
  }
  if (!(max_abs > cfg.amplitude_threshold_kw)) return CleaningRule::kAmplitude;

  // (c) installed power of a single category above the physical limit
  if (meta) {
    const auto a = meta->as_array();
    for (int i = 1; i < FeederMetadata::kCategoryCount; ++i)  // skip housing_units count
      if (a[static_cast<std::size_t>(i)] > cfg.physical_limit_kw)
        return CleaningRule::kPhysicalLimit;
  }

  // (d) feeders without metadata
  if (!meta || meta->all_zero()) return CleaningRule::kNoMetadata;

  // (e) feed-in exceeding installed producer power by more than 5 kW
  if (min_val < -(meta->producer_power_kw() + cfg.feed_in_margin_kw))
    return CleaningRule::kFeedInExceedsProducers;

  // (f) nightly feed-in although PV is the only producer
  if (meta->pv_systems > 0 && meta->other_producers == 0 && meta->batteries == 0) {
    for (std::int64_t j = 0; j < series->grid.n_steps(); ++j) {
      const auto& v = series->values[static_cast<std::size_t>(j)];
      if (!v || *v >= 0) continue;
      int mod = series->grid.index_to_timestamp(j).minute_of_day();
      if (mod < 120) return CleaningRule::kNightFeedInPvOnly;
    }
  }
  return std::nullopt;
}

}  // namespace detail_prep

/// Applies the plausibility rules (a)-(f) to every feeder appearing either in
/// the metadata or the measurements. Returns the kept ids and a full report.
inline std::pair<std::vector<std::string>, CleaningReport> filter_feeders(
    const std::map<std::string, FeederMetadata>& metadata,
    const std::vector<MeasurementSeries>& measurements, const CleaningConfig& cfg = {}) {
  std::map<std::string, const MeasurementSeries*> by_id;
  for (const auto& s : measurements) {
    if (!by_id.emplace(s.feeder_id, &s).second)
      throw std::invalid_argument("duplicate measurement series for feeder " + s.feeder_id);
  }
  if (!measurements.empty()) {
    const TimeGrid& grid = measurements.front().grid;
    for (const auto& s : measurements)
      if (!(s.grid == grid))
        throw std::invalid_argument("measurement series are not on a common grid");
  }

  std::set<std::string> ids;
  for (const auto& [id, m] : metadata) ids.insert(id);
  for (const auto& [id, s] : by_id) ids.insert(id);

  CleaningReport report;
  std::vector<std::string> kept;
  for (const auto& id : ids) {
    auto mit = metadata.find(id);
    const FeederMetadata* meta = mit == metadata.end() ? nullptr : &mit->second;
    auto sit = by_id.find(id);
    const MeasurementSeries* series = sit == by_id.end() ? nullptr : sit->second;
    auto failed = detail_prep::first_failed_rule(meta, series, cfg);
    report.verdicts.push_back(CleaningVerdict{id, !failed.has_value(), failed});
    if (failed)
      report.removed_by_rule[cleaning_rule_id(*failed)] += 1;
    else
      kept.push_back(id);
  }
  return {std::move(kept), std::move(report)};
}

inline void write_cleaning_report(const std::filesystem::path& path, const CleaningReport& report) {
  auto out = csv::open_output(path);
  out << "feeder_id,kept,failed_rule\n";
  for (const auto& v : report.verdicts)
    out << v.feeder_id << ',' << (v.kept ? '1' : '0') << ','
        << (v.failed_rule ? cleaning_rule_id(*v.failed_rule) : "") << '\n';
  for (const auto& [rule, count] : report.removed_by_rule)
    out << "(removed)," << count << ',' << rule << '\n';
}

// ---- feature construction ------------------------------------------------

/// Cyclical sin/cos encoding of day-of-year, day-of-week and minute-of-day.
/// Day-of-year uses period 365.25 to avoid a leap-year discontinuity.
inline std::array<double, kTimeEncodingDim> encode_timestamp(Timestamp t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Date d = t.date();
  double doy = two_pi * static_cast<double>(d.day_of_year()) / 365.25;
  double dow = two_pi * static_cast<double>(d.weekday()) / 7.0;
  double mod = two_pi * static_cast<double>(t.minute_of_day()) / 1440.0;
  return {std::sin(doy), std::cos(doy), std::sin(dow),
          std::cos(dow), std::sin(mod), std::cos(mod)};
}

/// Column-factored sample storage: metadata is constant per feeder and the
/// weather/timestamp/calendar block is constant per grid step, so rows hold
/// only (feeder, step, target). Keeps the desk-scale dataset in tens of MB.
class SampleSet {
 public:
  static constexpr int kStepDim = kWeatherDim + kTimeEncodingDim + kCalendarDim;

  SampleSet() = default;
  SampleSet(TimeGrid grid, std::vector<std::string> feeder_ids,
            std::vector<std::array<double, kMetadataDim>> feeder_meta,
            std::vector<std::array<double, kStepDim>> step_features)
      : grid_(grid),
        feeder_ids_(std::move(feeder_ids)),
        feeder_meta_(std::move(feeder_meta)),
        step_features_(std::move(step_features)) {}

  void add_row(std::int32_t feeder, std::int32_t step, double target) {
    row_feeder_.push_back(feeder);
    row_step_.push_back(step);
    row_target_.push_back(target);
  }

  std::size_t size() const { return row_target_.size(); }
  const TimeGrid& grid() const { return grid_; }
  const std::vector<std::string>& feeder_ids() const { return feeder_ids_; }
  std::size_t feeder_count() const { return feeder_ids_.size(); }

  std::int32_t feeder_of(std::size_t row) const { return row_feeder_[row]; }
  std::int32_t step_of(std::size_t row) const { return row_step_[row]; }
  double target(std::size_t row) const { return row_target_[row]; }

  double feature(std::size_t row, int col) const {
    if (col < kMetadataDim)
      return feeder_meta_[static_cast<std::size_t>(row_feeder_[row])]
                         [static_cast<std::size_t>(col)];
    return step_features_[static_cast<std::size_t>(row_step_[row])]
                         [static_cast<std::size_t>(col - kMetadataDim)];
  }

  void fill_row(std::size_t row, FeatureRow& out) const {
    const auto& meta = feeder_meta_[static_cast<std::size_t>(row_feeder_[row])];
    const auto& step = step_features_[static_cast<std::size_t>(row_step_[row])];
    std::copy(meta.begin(), meta.end(), out.begin());
    std::copy(step.begin(), step.end(), out.begin() + kMetadataDim);
  }

  FeatureRow feature_row(std::size_t row) const {
    FeatureRow r;
    fill_row(row, r);
    return r;
  }

  Sample sample(std::size_t row) const {
    Sample s;
    s.feeder_id = feeder_ids_[static_cast<std::size_t>(row_feeder_[row])];
    s.index = row_step_[row];
    s.features = feature_row(row);
    s.target_kw = row_target_[row];
    return s;
  }

 private:
  TimeGrid grid_;
  std::vector<std::string> feeder_ids_;
  std::vector<std::array<double, kMetadataDim>> feeder_meta_;
  std::vector<std::array<double, kStepDim>> step_features_;
  std::vector<std::int32_t> row_feeder_;
  std::vector<std::int32_t> row_step_;
  std::vector<double> row_target_;
};

/// Joins measurements with metadata, weather and calendar into model samples:
/// one row per (feeder, present index), features in the canonical order
/// 21 metadata | 4 weather | 6 timestamp | 2 calendar.
inline SampleSet build_samples(const std::map<std::string, FeederMetadata>& metadata,
                               const std::vector<MeasurementSeries>& measurements,
                               const WeatherSeries& weather, const Calendar& calendar) {
  if (measurements.empty()) throw std::invalid_argument("no measurement series");
  const TimeGrid& grid = measurements.front().grid;
  for (const auto& s : measurements)
    if (!(s.grid == grid)) throw std::invalid_argument("measurements not on a common grid");
  if (!(weather.grid == grid))
    throw std::runtime_error("weather series does not cover the measurement grid");

  std::vector<std::array<double, SampleSet::kStepDim>> step_features(
      static_cast<std::size_t>(grid.n_steps()));
  for (std::int64_t j = 0; j < grid.n_steps(); ++j) {
    Timestamp t = grid.index_to_timestamp(j);
    const CalendarDay* day = calendar.find(t.date());
    if (!day)
      throw std::runtime_error("calendar has no entry for " + t.date().to_string());
    auto i = static_cast<std::size_t>(j);
    auto& f = step_features[i];
    f[0] = weather.global_radiation[i];
    f[1] = weather.air_temperature[i];
    f[2] = weather.precipitation[i];
    f[3] = weather.snow_height[i];
    auto enc = encode_timestamp(t);
    std::copy(enc.begin(), enc.end(), f.begin() + kWeatherDim);
    f[kWeatherDim + kTimeEncodingDim + 0] = day->is_holiday ? 1.0 : 0.0;
    f[kWeatherDim + kTimeEncodingDim + 1] = day->is_workday ? 1.0 : 0.0;
  }

  std::vector<std::string> ids;
  std::vector<std::array<double, kMetadataDim>> meta;
  std::vector<const MeasurementSeries*> ordered;
  for (const auto& s : measurements) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->feeder_id < b->feeder_id; });
  for (const auto* s : ordered) {
    auto it = metadata.find(s->feeder_id);
    if (it == metadata.end())
      throw std::runtime_error("no metadata for feeder " + s->feeder_id);
    ids.push_back(s->feeder_id);
    meta.push_back(it->second.as_array());
  }

  SampleSet set(grid, std::move(ids), std::move(meta), std::move(step_features));
  for (std::size_t fi = 0; fi < ordered.size(); ++fi) {
    const auto& values = ordered[fi]->values;
    for (std::size_t j = 0; j < values.size(); ++j)
      if (values[j])
        set.add_row(static_cast<std::int32_t>(fi), static_cast<std::int32_t>(j), *values[j]);
  }
  return set;
}

// ---- samples.csv ----------------------------------------------------------

inline std::string samples_header() {
  std::string h = "feeder_id,timestamp";
  for (int i = 0; i < kFeatureDim; ++i) h += ",f" + std::to_string(i);
  h += ",target_kw";
  return h;
}

inline void write_samples(const std::filesystem::path& path, const SampleSet& samples) {
  auto out = csv::open_output(path);
  out << samples_header() << "\n";
  FeatureRow row;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    samples.fill_row(r, row);
    out << samples.feeder_ids()[static_cast<std::size_t>(samples.feeder_of(r))] << ','
        << samples.grid().index_to_timestamp(samples.step_of(r)).to_string();
    for (double v : row) out << ',' << csv::format_double(v);
    out << ',' << csv::format_double(samples.target(r)) << '\n';
  }
}

/// Reads samples.csv back into a SampleSet. Feature rows are stored per
/// (feeder, step) pair; rows of one feeder must agree on the metadata block.
inline SampleSet read_samples(const std::filesystem::path& path) {
  auto in = csv::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  csv::expect_header(csv::strip_cr(line), samples_header(), path);

  struct Row {
    std::string feeder;
    Timestamp t;
    FeatureRow features;
    double target;
  };
  std::vector<Row> rows;
  std::int64_t min_minutes = 0, max_minutes = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = csv::split_line(csv::strip_cr(line));
    if (fields.size() != 3 + kFeatureDim)
      throw std::runtime_error(path.string() + ": wrong column count");
    Row r;
    r.feeder = std::string(fields[0]);
    r.t = Timestamp::parse(fields[1]);
    for (int i = 0; i < kFeatureDim; ++i)
      r.features[static_cast<std::size_t>(i)] =
          csv::parse_double(fields[static_cast<std::size_t>(2 + i)]);
    r.target = csv::parse_double(fields.back());
    if (rows.empty() || r.t.minutes < min_minutes) min_minutes = r.t.minutes;
    if (rows.empty() || r.t.minutes > max_minutes) max_minutes = r.t.minutes;
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no sample rows");
  TimeGrid grid{Timestamp{min_minutes}, (max_minutes - min_minutes) / kStepMinutes + 1};

  std::map<std::string, std::int32_t> feeder_index;
  std::vector<std::string> ids;
  std::vector<std::array<double, kMetadataDim>> meta;
  std::vector<std::array<double, SampleSet::kStepDim>> step_features(
      static_cast<std::size_t>(grid.n_steps()));
  for (const auto& r : rows) {
    if (feeder_index.emplace(r.feeder, static_cast<std::int32_t>(ids.size())).second) {
      ids.push_back(r.feeder);
      std::array<double, kMetadataDim> m;
      std::copy(r.features.begin(), r.features.begin() + kMetadataDim, m.begin());
      meta.push_back(m);
    }
    auto j = static_cast<std::size_t>(grid.timestamp_to_index(r.t));
    std::copy(r.features.begin() + kMetadataDim, r.features.end(), step_features[j].begin());
  }
  // map insertion order != ids order; rebuild in sorted-id order for determinism
  std::vector<std::int32_t> remap(ids.size());
  {
    std::vector<std::string> sorted_ids = ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    std::map<std::string, std::int32_t> new_index;
    std::vector<std::array<double, kMetadataDim>> new_meta(ids.size());
    for (std::size_t i = 0; i < sorted_ids.size(); ++i) {
      new_index[sorted_ids[i]] = static_cast<std::int32_t>(i);
      new_meta[i] = meta[static_cast<std::size_t>(feeder_index[sorted_ids[i]])];
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
      remap[static_cast<std::size_t>(feeder_index[ids[i]])] = new_index[ids[i]];
    ids = std::move(sorted_ids);
    meta = std::move(new_meta);
    for (auto& [id, idx] : feeder_index) idx = new_index[id];
  }
  (void)remap;

  SampleSet set(grid, std::move(ids), std::move(meta), std::move(step_features));
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].feeder != rows[b].feeder) return rows[a].feeder < rows[b].feeder;
    return rows[a].t < rows[b].t;
  });
  for (std::size_t i : order) {
    const auto& r = rows[i];
    set.add_row(feeder_index[r.feeder],
                static_cast<std::int32_t>(grid.timestamp_to_index(r.t)), r.target);
  }
  return set;
}

}  // namespace feederlab
