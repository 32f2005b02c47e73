#pragma once

// Randomized feeder series for metric stress tests: gaps, zero-crossings and
// controlled counts of peak-eligible days.

#include <optional>
#include <vector>

#include "feederlab/domain.hpp"
#include "feederlab/rng.hpp"

namespace testgen {

struct RandomSeries {
  feederlab::TimeGrid grid;
  std::vector<std::optional<double>> y;
  std::vector<double> yhat;
};

inline RandomSeries random_series(feederlab::Rng& rng, int max_days = 30) {
  using feederlab::Timestamp;
  int days = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_days)));
  RandomSeries s;
  s.grid = feederlab::TimeGrid{Timestamp::parse("2023-03-01T00:00"), days * 96};
  auto n = static_cast<std::size_t>(s.grid.n_steps());
  s.y.resize(n);
  s.yhat.resize(n);

  double gap_rate = rng.uniform(0.0, 0.35);
  int target_cons_days = static_cast<int>(rng.below(static_cast<std::uint64_t>(days + 1)));
  int target_feed_days = static_cast<int>(rng.below(static_cast<std::uint64_t>(days + 1)));

  for (int d = 0; d < days; ++d) {
    bool cons_day = d < target_cons_days;
    bool feed_day = days - d <= target_feed_days;
    bool drop_whole_day = rng.bernoulli(0.05);
    for (int k = 0; k < 96; ++k) {
      auto j = static_cast<std::size_t>(d * 96 + k);
      s.yhat[j] = rng.uniform(-25.0, 25.0);
      if (drop_whole_day || rng.bernoulli(gap_rate)) continue;
      double v = rng.uniform(-8.0, 8.0);  // zero-crossing base
      if (cons_day && k == 40 + static_cast<int>(rng.below(8))) v = rng.uniform(10.0, 40.0);
      if (feed_day && k == 48 + static_cast<int>(rng.below(8))) v = rng.uniform(-40.0, -10.0);
      s.y[j] = v;
    }
  }
  // occasionally evaluate a perfect estimator
  if (rng.bernoulli(0.1)) {
    for (std::size_t j = 0; j < n; ++j)
      if (s.y[j]) s.yhat[j] = *s.y[j];
  }
  return s;
}

}  // namespace testgen
