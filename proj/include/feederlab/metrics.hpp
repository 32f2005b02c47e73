#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feederlab/csv.hpp"
#include "feederlab/domain.hpp"

namespace feederlab {

// Evaluation of pseudo-measurements against ground truth: MAE, RMSE and
// MAE_norm over all present observations, and the six daily peak metrics
// (magnitude, timing, shape for consumption and feed-in peaks).

struct PeakConfig {
  double threshold_kw = 10.0;   // a day counts if |y| reaches +-threshold
  int min_days = 10;            // feeders with fewer eligible days are skipped
  double shape_window_h = 2.0;  // half-width of the shape window around j1
  int min_window_points = 3;    // shape pairs with fewer present points are skipped
};

enum class PeakType { kConsumption, kFeedIn };

struct PeakPair {
  std::int64_t j1 = 0;  // ground-truth daily extremum index
  std::int64_t j2 = 0;  // estimate daily extremum index (same day, same present set)
};

/// Per-feeder set of daily peak pairs; empty when fewer than min_days days
/// reach the threshold.
struct PeakSet {
  std::string feeder_id;
  PeakType type = PeakType::kConsumption;
  std::vector<PeakPair> pairs;
  std::int64_t eligible_days = 0;

  bool empty() const { return pairs.empty(); }
};

namespace detail_metrics {

inline void check_aligned(const std::vector<std::optional<double>>& y,
                          const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("ground truth and estimate series differ in length");
}

}  // namespace detail_metrics

/// Mean absolute error over the present indices N_i. nullopt when N_i is empty.
inline std::optional<double> mae(const std::vector<std::optional<double>>& y,
                                 const std::vector<double>& yhat) {
  detail_metrics::check_aligned(y, yhat);
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (!y[j]) continue;
    sum += std::abs(*y[j] - yhat[j]);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

inline std::optional<double> rmse(const std::vector<std::optional<double>>& y,
                                  const std::vector<double>& yhat) {
  detail_metrics::check_aligned(y, yhat);
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (!y[j]) continue;
    double e = *y[j] - yhat[j];
    sum += e * e;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(sum / static_cast<double>(n));
}

/// MAE normalized by the min-max range of the measurement. nullopt for an
/// empty N_i or a zero range (never silently 0 or inf).
inline std::optional<double> mae_norm(const std::vector<std::optional<double>>& y,
                                      const std::vector<double>& yhat) {
  auto m = mae(y, yhat);
  if (!m) return std::nullopt;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& v : y) {
    if (!v) continue;
    lo = std::min(lo, *v);
    hi = std::max(hi, *v);
  }
  if (!(hi > lo)) return std::nullopt;
  return *m / (hi - lo);
}

/// Extracts the daily peak pairs of one feeder. For consumption, a day is
/// eligible iff some present measurement reaches +threshold; j1/j2 are the
/// argmax of measurement/estimate over the day's present indices (earliest
/// index wins ties, applied identically to both series). Feed-in mirrors
/// this with -threshold and argmin.
inline PeakSet extract_peaks(const std::vector<std::optional<double>>& y,
                             const std::vector<double>& yhat, const TimeGrid& grid,
                             PeakType type, const PeakConfig& cfg = {},
                             std::string feeder_id = {}) {
  detail_metrics::check_aligned(y, yhat);
  if (static_cast<std::int64_t>(y.size()) != grid.n_steps())
    throw std::invalid_argument("series length does not match grid");
  const bool consumption = type == PeakType::kConsumption;

  PeakSet set;
  set.feeder_id = std::move(feeder_id);
  set.type = type;
  for (const DaySpan& day : day_partition(grid)) {
    bool eligible = false;
    std::int64_t j1 = -1, j2 = -1;
    double best_y = 0.0, best_yhat = 0.0;
    for (std::int64_t j = day.first; j < day.first + day.count; ++j) {
      const auto& v = y[static_cast<std::size_t>(j)];
      if (!v) continue;
      double yv = *v;
      double hv = yhat[static_cast<std::size_t>(j)];
      if (consumption ? yv >= cfg.threshold_kw : yv <= -cfg.threshold_kw) eligible = true;
      if (j1 < 0 || (consumption ? yv > best_y : yv < best_y)) {
        j1 = j;
        best_y = yv;
      }
      if (j2 < 0 || (consumption ? hv > best_yhat : hv < best_yhat)) {
        j2 = j;
        best_yhat = hv;
      }
    }
    if (eligible) {
      set.pairs.push_back(PeakPair{j1, j2});
      ++set.eligible_days;
    }
  }
  if (set.eligible_days < cfg.min_days) set.pairs.clear();
  return set;
}

/// Peak magnitude error: mean |y at j1 - yhat at j2| over the pairs, kW.
inline std::optional<double> pmag(const std::vector<std::optional<double>>& y,
                                  const std::vector<double>& yhat, const PeakSet& peaks) {
  if (peaks.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& p : peaks.pairs) {
    const auto& yv = y[static_cast<std::size_t>(p.j1)];
    if (!yv) throw std::logic_error("peak index without measurement");
    sum += std::abs(*yv - yhat[static_cast<std::size_t>(p.j2)]);
  }
  return sum / static_cast<double>(peaks.pairs.size());
}

/// Peak timing error: mean |j1 - j2| in hours (multiples of 0.25 on the grid).
inline std::optional<double> ptime(const PeakSet& peaks) {
  if (peaks.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& p : peaks.pairs)
    sum += static_cast<double>(std::abs(p.j1 - p.j2)) * (kStepMinutes / 60.0);
  return sum / static_cast<double>(peaks.pairs.size());
}

struct PShapeResult {
  std::optional<double> value;
  std::int64_t pairs_used = 0;
  std::int64_t pairs_skipped = 0;  // windows with fewer than min_window_points
};

/// Peak shape error. For each pair, Q is the set of present indices within
/// +-window hours of j1 (inclusive), clipped to the day. Both series are
/// min-max normalized over Q independently; a zero range maps the series to
/// the constant 0.5. The pair score is the summed absolute difference over Q.
inline PShapeResult pshape(const std::vector<std::optional<double>>& y,
                           const std::vector<double>& yhat, const PeakSet& peaks,
                           const TimeGrid& grid, const PeakConfig& cfg = {}) {
  PShapeResult result;
  if (peaks.empty()) return result;
  auto days = day_partition(grid);
  auto window_steps = static_cast<std::int64_t>(
      std::llround(cfg.shape_window_h * 60.0 / kStepMinutes));

  double total = 0.0;
  for (const auto& p : peaks.pairs) {
    auto day_it = std::find_if(days.begin(), days.end(), [&](const DaySpan& d) {
      return p.j1 >= d.first && p.j1 < d.first + d.count;
    });
    std::int64_t lo = std::max(p.j1 - window_steps, day_it->first);
    std::int64_t hi = std::min(p.j1 + window_steps, day_it->first + day_it->count - 1);

    std::vector<std::int64_t> q;
    for (std::int64_t j = lo; j <= hi; ++j)
      if (y[static_cast<std::size_t>(j)]) q.push_back(j);
    if (static_cast<int>(q.size()) < cfg.min_window_points) {
      ++result.pairs_skipped;
      continue;
    }

    double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
    double hlo = std::numeric_limits<double>::infinity(), hhi = -hlo;
    for (std::int64_t j : q) {
      double yv = *y[static_cast<std::size_t>(j)];
      double hv = yhat[static_cast<std::size_t>(j)];
      ylo = std::min(ylo, yv);
      yhi = std::max(yhi, yv);
      hlo = std::min(hlo, hv);
      hhi = std::max(hhi, hv);
    }
    double score = 0.0;
    for (std::int64_t j : q) {
      double s = yhi > ylo ? (*y[static_cast<std::size_t>(j)] - ylo) / (yhi - ylo) : 0.5;
      double sh = hhi > hlo ? (yhat[static_cast<std::size_t>(j)] - hlo) / (hhi - hlo) : 0.5;
      score += std::abs(s - sh);
    }
    total += score;
    ++result.pairs_used;
  }
  if (result.pairs_used > 0) result.value = total / static_cast<double>(result.pairs_used);
  return result;
}

// ---- per-feeder evaluation -------------------------------------------------

struct FeederMetrics {
  std::string feeder_id;
  std::int64_t n_present = 0;
  std::optional<double> mae_kw;
  std::optional<double> rmse_kw;
  std::optional<double> mae_norm;       // absent for zero min-max range
  std::optional<double> pmag_c, pmag_f; // kW
  std::optional<double> ptime_c, ptime_f;  // hours
  std::optional<double> pshape_c, pshape_f;
  std::int64_t eligible_days_c = 0, eligible_days_f = 0;
  std::int64_t shape_skipped_c = 0, shape_skipped_f = 0;
};

inline FeederMetrics evaluate_feeder(const std::string& feeder_id,
                                     const std::vector<std::optional<double>>& y,
                                     const std::vector<double>& yhat, const TimeGrid& grid,
                                     const PeakConfig& cfg = {}) {
  FeederMetrics m;
  m.feeder_id = feeder_id;
  for (const auto& v : y) m.n_present += v.has_value();
  m.mae_kw = mae(y, yhat);
  m.rmse_kw = rmse(y, yhat);
  m.mae_norm = mae_norm(y, yhat);

  PeakSet pc = extract_peaks(y, yhat, grid, PeakType::kConsumption, cfg, feeder_id);
  m.eligible_days_c = pc.eligible_days;
  m.pmag_c = pmag(y, yhat, pc);
  m.ptime_c = ptime(pc);
  auto sc = pshape(y, yhat, pc, grid, cfg);
  m.pshape_c = sc.value;
  m.shape_skipped_c = sc.pairs_skipped;

  PeakSet pf = extract_peaks(y, yhat, grid, PeakType::kFeedIn, cfg, feeder_id);
  m.eligible_days_f = pf.eligible_days;
  m.pmag_f = pmag(y, yhat, pf);
  m.ptime_f = ptime(pf);
  auto sf = pshape(y, yhat, pf, grid, cfg);
  m.pshape_f = sf.value;
  m.shape_skipped_f = sf.pairs_skipped;
  return m;
}

// ---- aggregation -------------------------------------------------------------

struct MetricStats {
  std::int64_t count = 0;
  double mean = 0, stddev = 0, min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

/// Linear-interpolation quantile over an unsorted sample.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(v.begin(), v.end());
  double pos = p * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline MetricStats compute_stats(const std::vector<double>& values) {
  MetricStats s;
  s.count = static_cast<std::int64_t>(values.size());
  if (values.empty()) return s;
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.q25 = quantile(values, 0.25);
  s.median = quantile(values, 0.50);
  s.q75 = quantile(values, 0.75);
  return s;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"mae_kw",  "mae_norm", "rmse_kw",
                                                 "pmag_c",  "pmag_f",   "ptime_c",
                                                 "ptime_f", "pshape_c", "pshape_f"};
  return names;
}

inline std::optional<double> metric_value(const FeederMetrics& m, const std::string& name) {
  if (name == "mae_kw") return m.mae_kw;
  if (name == "mae_norm") return m.mae_norm;
  if (name == "rmse_kw") return m.rmse_kw;
  if (name == "pmag_c") return m.pmag_c;
  if (name == "pmag_f") return m.pmag_f;
  if (name == "ptime_c") return m.ptime_c;
  if (name == "ptime_f") return m.ptime_f;
  if (name == "pshape_c") return m.pshape_c;
  if (name == "pshape_f") return m.pshape_f;
  throw std::invalid_argument("unknown metric " + name);
}

inline std::string undefined_reason(const FeederMetrics& m, const std::string& name) {
  if (name == "mae_kw" || name == "rmse_kw") return m.n_present == 0 ? "no_measurements" : "";
  if (name == "mae_norm") return m.n_present == 0 ? "no_measurements" : "zero_range";
  bool feed_in = name.ends_with("_f");
  std::int64_t days = feed_in ? m.eligible_days_f : m.eligible_days_c;
  if (days == 0) return "no_eligible_days";
  return "below_min_days";
}

/// Feeder-wise metrics first, aggregate second. Peak metrics aggregate only
/// over feeders with a non-empty peak set (the count column records how many).
struct MetricReport {
  std::vector<FeederMetrics> per_feeder;
  std::map<std::string, MetricStats> aggregate;  // keyed by metric name
};

inline MetricReport aggregate_report(std::vector<FeederMetrics> per_feeder) {
  MetricReport report;
  std::sort(per_feeder.begin(), per_feeder.end(),
            [](const auto& a, const auto& b) { return a.feeder_id < b.feeder_id; });
  for (const auto& name : metric_names()) {
    std::vector<double> values;
    for (const auto& m : per_feeder)
      if (auto v = metric_value(m, name)) values.push_back(*v);
    report.aggregate[name] = compute_stats(values);
  }
  report.per_feeder = std::move(per_feeder);
  return report;
}

/// report.csv: one row per feeder per metric, then aggregate rows. Undefined
/// metrics keep an empty value cell and carry a reason.
inline void write_report_csv(const std::filesystem::path& path, const MetricReport& report) {
  auto out = csv::open_output(path);
  out << "feeder_id,metric,value,reason\n";
  for (const auto& m : report.per_feeder) {
    for (const auto& name : metric_names()) {
      auto v = metric_value(m, name);
      out << m.feeder_id << ',' << name << ',';
      if (v)
        out << csv::format_double(*v) << ',';
      else
        out << ',' << undefined_reason(m, name);
      out << '\n';
    }
  }
  for (const auto& [name, stats] : report.aggregate) {
    out << "(aggregate)," << name << ":count," << stats.count << ",\n";
    if (stats.count == 0) continue;
    out << "(aggregate)," << name << ":mean," << csv::format_double(stats.mean) << ",\n";
    out << "(aggregate)," << name << ":std," << csv::format_double(stats.stddev) << ",\n";
    out << "(aggregate)," << name << ":min," << csv::format_double(stats.min) << ",\n";
    out << "(aggregate)," << name << ":q25," << csv::format_double(stats.q25) << ",\n";
    out << "(aggregate)," << name << ":median," << csv::format_double(stats.median) << ",\n";
    out << "(aggregate)," << name << ":q75," << csv::format_double(stats.q75) << ",\n";
    out << "(aggregate)," << name << ":max," << csv::format_double(stats.max) << ",\n";
  }
}

}  // namespace feederlab
