#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "feederlab/domain.hpp"

namespace feederlab::csv {

// UTF-8, header row, '.' decimal separator, ISO-8601 timestamps.

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

inline bool parse_bool(std::string_view s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(s) + "'");
}

inline std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);  // binary: LF line endings everywhere
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline void expect_header(std::string_view got, std::string_view want,
                          const std::filesystem::path& path) {
  if (got != want)
    throw std::runtime_error(path.string() + ": unexpected header '" + std::string(got) +
                             "', expected '" + std::string(want) + "'");
}

inline std::string& strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// ---- measurements.csv: feeder_id,timestamp,active_power_kw -------------
// Absent rows are measuring gaps.

inline void write_measurements(const std::filesystem::path& path,
                               const std::vector<MeasurementSeries>& series,
                               std::string_view value_column = "active_power_kw") {
  auto out = open_output(path);
  out << "feeder_id,timestamp," << value_column << "\n";
  for (const auto& s : series) {
    for (std::int64_t j = 0; j < s.grid.n_steps(); ++j) {
      if (!s.values[static_cast<std::size_t>(j)]) continue;
      out << s.feeder_id << ',' << s.grid.index_to_timestamp(j).to_string() << ','
          << format_double(*s.values[static_cast<std::size_t>(j)]) << '\n';
    }
  }
}

/// Reads a measurement-shaped CSV and aligns all feeders onto one common
/// grid spanning the earliest to the latest timestamp in the file.
inline std::vector<MeasurementSeries> read_measurements(
    const std::filesystem::path& path, std::string_view value_column = "active_power_kw") {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  expect_header(strip_cr(line), "feeder_id,timestamp," + std::string(value_column), path);

  struct Row {
    std::string feeder;
    std::int64_t minutes;
    double value;
  };
  std::vector<Row> rows;
  std::int64_t min_minutes = 0, max_minutes = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(strip_cr(line));
    if (fields.size() != 3)
      throw std::runtime_error(path.string() + ": expected 3 columns, got line '" + line + "'");
    Timestamp t = Timestamp::parse(fields[1]);
    rows.push_back(Row{std::string(fields[0]), t.minutes, parse_double(fields[2])});
    if (first || t.minutes < min_minutes) min_minutes = t.minutes;
    if (first || t.minutes > max_minutes) max_minutes = t.minutes;
    first = false;
  }
  if (rows.empty()) return {};
  if ((max_minutes - min_minutes) % kStepMinutes != 0)
    throw std::runtime_error(path.string() + ": timestamps not on a 15-minute grid");
  TimeGrid grid{Timestamp{min_minutes}, (max_minutes - min_minutes) / kStepMinutes + 1};

  std::map<std::string, MeasurementSeries> by_feeder;
  for (const auto& r : rows) {
    auto [it, inserted] = by_feeder.try_emplace(r.feeder);
    if (inserted) {
      it->second.feeder_id = r.feeder;
      it->second.grid = grid;
      it->second.values.assign(static_cast<std::size_t>(grid.n_steps()), std::nullopt);
    }
    std::int64_t j = grid.timestamp_to_index(Timestamp{r.minutes});
    it->second.values[static_cast<std::size_t>(j)] = r.value;
  }
  std::vector<MeasurementSeries> out;
  out.reserve(by_feeder.size());
  for (auto& [id, s] : by_feeder) out.push_back(std::move(s));
  return out;
}

// ---- metadata.csv: feeder_id + the 21 category columns -----------------

inline std::string metadata_header() {
  std::string h = "feeder_id";
  for (const char* name : FeederMetadata::category_names()) {
    h += ',';
    h += name;
  }
  return h;
}

inline void write_metadata(const std::filesystem::path& path,
                           const std::map<std::string, FeederMetadata>& metadata) {
  auto out = open_output(path);
  out << metadata_header() << "\n";
  for (const auto& [id, m] : metadata) {
    out << id;
    for (double v : m.as_array()) out << ',' << format_double(v);
    out << '\n';
  }
}

inline std::map<std::string, FeederMetadata> read_metadata(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  expect_header(strip_cr(line), metadata_header(), path);
  std::map<std::string, FeederMetadata> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(strip_cr(line));
    if (fields.size() != 1 + FeederMetadata::kCategoryCount)
      throw std::runtime_error(path.string() + ": wrong column count in '" + line + "'");
    std::array<double, FeederMetadata::kCategoryCount> a{};
    for (int i = 0; i < FeederMetadata::kCategoryCount; ++i)
      a[static_cast<std::size_t>(i)] = parse_double(fields[static_cast<std::size_t>(i + 1)]);
    FeederMetadata m = FeederMetadata::from_array(a);
    m.validate();
    out.emplace(std::string(fields[0]), m);
  }
  return out;
}

// ---- weather.csv --------------------------------------------------------

inline constexpr const char* kWeatherHeader =
    "timestamp,global_radiation_wm2,air_temperature_c,precipitation_mm,snow_height_cm";

inline void write_weather(const std::filesystem::path& path, const WeatherSeries& w) {
  auto out = open_output(path);
  out << kWeatherHeader << "\n";
  for (std::int64_t j = 0; j < w.grid.n_steps(); ++j) {
    auto i = static_cast<std::size_t>(j);
    out << w.grid.index_to_timestamp(j).to_string() << ',' << format_double(w.global_radiation[i])
        << ',' << format_double(w.air_temperature[i]) << ',' << format_double(w.precipitation[i])
        << ',' << format_double(w.snow_height[i]) << '\n';
  }
}

inline WeatherSeries read_weather(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  expect_header(strip_cr(line), kWeatherHeader, path);
  std::vector<Timestamp> stamps;
  WeatherSeries w;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(strip_cr(line));
    if (fields.size() != 5)
      throw std::runtime_error(path.string() + ": wrong column count in '" + line + "'");
    stamps.push_back(Timestamp::parse(fields[0]));
    w.global_radiation.push_back(parse_double(fields[1]));
    w.air_temperature.push_back(parse_double(fields[2]));
    w.precipitation.push_back(parse_double(fields[3]));
    w.snow_height.push_back(parse_double(fields[4]));
  }
  if (stamps.empty()) throw std::runtime_error(path.string() + ": no weather rows");
  w.grid = TimeGrid{stamps.front(), static_cast<std::int64_t>(stamps.size())};
  for (std::size_t i = 0; i < stamps.size(); ++i)
    if (stamps[i] != w.grid.index_to_timestamp(static_cast<std::int64_t>(i)))
      throw std::runtime_error(path.string() + ": weather timestamps must be gap-free");
  w.validate();
  return w;
}

// ---- calendar.csv -------------------------------------------------------

inline void write_calendar(const std::filesystem::path& path, const Calendar& cal) {
  auto out = open_output(path);
  out << "date,is_holiday,is_workday\n";
  for (const auto& d : cal.days())
    out << d.date.to_string() << ',' << (d.is_holiday ? '1' : '0') << ','
        << (d.is_workday ? '1' : '0') << '\n';
}

inline Calendar read_calendar(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  expect_header(strip_cr(line), "date,is_holiday,is_workday", path);
  std::vector<CalendarDay> days;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(strip_cr(line));
    if (fields.size() != 3)
      throw std::runtime_error(path.string() + ": wrong column count in '" + line + "'");
    days.push_back(CalendarDay{Date::parse(fields[0]), parse_bool(fields[1]), parse_bool(fields[2])});
  }
  return Calendar(std::move(days));
}

// ---- dataset directory --------------------------------------------------

struct Dataset {
  std::map<std::string, FeederMetadata> metadata;
  std::vector<MeasurementSeries> measurements;  // ordered by feeder_id
  WeatherSeries weather;
  Calendar calendar;
};

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  write_measurements(dir / "measurements.csv", ds.measurements);
  write_metadata(dir / "metadata.csv", ds.metadata);
  write_weather(dir / "weather.csv", ds.weather);
  write_calendar(dir / "calendar.csv", ds.calendar);
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.metadata = read_metadata(dir / "metadata.csv");
  ds.measurements = read_measurements(dir / "measurements.csv");
  ds.weather = read_weather(dir / "weather.csv");
  ds.calendar = read_calendar(dir / "calendar.csv");
  return ds;
}

}  // namespace feederlab::csv
