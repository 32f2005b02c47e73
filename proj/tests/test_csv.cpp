#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "feederlab/csv.hpp"
#include "feederlab/datagen.hpp"
#include "feederlab/rng.hpp"

using namespace feederlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "feederlab_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("measurement CSV round trip preserves values and gaps") {
  auto dir = temp_dir("csv_measurements");
  TimeGrid grid{Timestamp::parse("2023-02-01T00:00"), 96};
  Rng rng(7);

  std::vector<MeasurementSeries> series;
  for (int f = 0; f < 3; ++f) {
    MeasurementSeries s;
    s.feeder_id = "F" + std::to_string(f + 1);
    s.grid = grid;
    s.values.resize(96);
    for (std::size_t j = 0; j < 96; ++j)
      if (!rng.bernoulli(0.2)) s.values[j] = rng.uniform(-50.0, 80.0);
    s.values[0] = 1.0;  // pin the grid start for all feeders
    series.push_back(std::move(s));
  }
  series[1].values[95] = -3.25;  // pin the grid end

  csv::write_measurements(dir / "m.csv", series);
  auto back = csv::read_measurements(dir / "m.csv");
  REQUIRE(back.size() == series.size());
  for (std::size_t f = 0; f < series.size(); ++f) {
    CHECK(back[f].feeder_id == series[f].feeder_id);
    REQUIRE(back[f].grid == series[f].grid);
    for (std::size_t j = 0; j < 96; ++j) {
      REQUIRE(back[f].values[j].has_value() == series[f].values[j].has_value());
      if (series[f].values[j]) CHECK(*back[f].values[j] == *series[f].values[j]);
    }
  }
}

TEST_CASE("metadata CSV round trip is exact") {
  auto dir = temp_dir("csv_metadata");
  std::map<std::string, FeederMetadata> meta;
  FeederMetadata a;
  a.housing_units = 14;
  a.pv_systems = 29.3;
  a.g1 = 123.4;
  meta["F001"] = a;
  meta["F002"] = FeederMetadata{};
  csv::write_metadata(dir / "meta.csv", meta);
  auto back = csv::read_metadata(dir / "meta.csv");
  REQUIRE(back.size() == 2);
  CHECK(back["F001"].as_array() == a.as_array());
  CHECK(back["F002"].all_zero());
}

TEST_CASE("weather CSV requires a gap-free grid") {
  auto dir = temp_dir("csv_weather");
  auto w = generate_weather(3, Date::parse("2023-03-01"), Date::parse("2023-03-04"));
  csv::write_weather(dir / "w.csv", w);
  auto back = csv::read_weather(dir / "w.csv");
  REQUIRE(back.grid == w.grid);
  for (std::size_t j = 0; j < back.air_temperature.size(); ++j) {
    CHECK(back.air_temperature[j] == w.air_temperature[j]);
    CHECK(back.global_radiation[j] == w.global_radiation[j]);
  }
}

TEST_CASE("calendar CSV round trip") {
  auto dir = temp_dir("csv_calendar");
  auto cal = generate_calendar(Date::parse("2023-12-20"), Date::parse("2024-01-05"));
  csv::write_calendar(dir / "c.csv", cal);
  auto back = csv::read_calendar(dir / "c.csv");
  REQUIRE(back.days().size() == cal.days().size());
  const auto* christmas = back.find(Date::parse("2023-12-25"));
  REQUIRE(christmas != nullptr);
  CHECK(christmas->is_holiday);
  CHECK_FALSE(christmas->is_workday);
}

TEST_CASE("malformed headers are rejected") {
  auto dir = temp_dir("csv_bad");
  {
    auto out = csv::open_output(dir / "bad.csv");
    out << "feeder,when,value\nF1,2023-01-01T00:00,1\n";
  }
  CHECK_THROWS(csv::read_measurements(dir / "bad.csv"));
}

TEST_CASE("timestamps off the 15-minute grid are rejected") {
  auto dir = temp_dir("csv_offgrid");
  {
    auto out = csv::open_output(dir / "m.csv");
    out << "feeder_id,timestamp,active_power_kw\n"
        << "F1,2023-01-01T00:00,1\nF1,2023-01-01T00:07,2\n";
  }
  CHECK_THROWS(csv::read_measurements(dir / "m.csv"));
}
