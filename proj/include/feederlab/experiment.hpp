#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "feederlab/config.hpp"
#include "feederlab/metrics.hpp"
#include "feederlab/models/model.hpp"

namespace feederlab {

// Feeder-wise 5-fold cross-validation over the three model kinds: every
// feeder lands in exactly one test block, whole feeders move between train
// and test, and no temporal splitting happens.

struct FoldPlan {
  std::uint64_t seed = 0;
  int k = 5;
  struct Fold {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
  };
  std::vector<Fold> folds;
};

/// Random feeder permutation split into k near-equal test blocks; the first
/// (n mod k) blocks take the extra feeder. Fold f trains on everything
/// outside block f.
inline FoldPlan plan_folds(std::vector<std::string> feeder_ids, int k, std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > feeder_ids.size())
    throw std::invalid_argument("fold count must be between 1 and the feeder count");
  std::sort(feeder_ids.begin(), feeder_ids.end());
  Rng rng(Rng::splitmix(seed) ^ 0x666f6c6473ULL);
  rng.shuffle(feeder_ids);

  FoldPlan plan;
  plan.seed = seed;
  plan.k = k;
  const std::size_t n = feeder_ids.size();
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    FoldPlan::Fold fold;
    fold.test_ids.assign(feeder_ids.begin() + static_cast<std::ptrdiff_t>(pos),
                         feeder_ids.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
    std::sort(fold.test_ids.begin(), fold.test_ids.end());
    plan.folds.push_back(std::move(fold));
  }
  for (int f = 0; f < k; ++f) {
    auto& fold = plan.folds[static_cast<std::size_t>(f)];
    std::set<std::string> test(fold.test_ids.begin(), fold.test_ids.end());
    for (const auto& id : feeder_ids)
      if (!test.count(id)) fold.train_ids.push_back(id);
    std::sort(fold.train_ids.begin(), fold.train_ids.end());
  }
  return plan;
}

inline nlohmann::json fold_plan_to_json(const FoldPlan& plan) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : plan.folds)
    folds.push_back({{"train", f.train_ids}, {"test", f.test_ids}});
  return nlohmann::json{{"seed", plan.seed}, {"k", plan.k}, {"folds", std::move(folds)}};
}

/// Test-only estimator hook replacing model training: maps a test feeder's
/// present indices to estimates. Production runs never set it.
using EstimatorOverride = std::function<std::vector<double>(
    int fold, const std::string& feeder_id, const std::vector<std::int64_t>& present_indices)>;

struct SubExperiment {
  ModelKind model = ModelKind::kLinear;
  int fold = 0;
  MetricReport report;
  std::int64_t leakage_touches = 0;  // test-feeder samples seen during training
  std::int64_t trained_rounds = 0;   // boosting rounds kept / epochs run
};

struct ExperimentResult {
  FoldPlan plan;
  CleaningReport cleaning;
  std::vector<std::string> kept_ids;
  std::vector<SubExperiment> subs;  // canonical (model, fold) order
  std::int64_t leakage_total = 0;

  const SubExperiment& sub(ModelKind kind, int fold) const {
    for (const auto& s : subs)
      if (s.model == kind && s.fold == fold) return s;
    throw std::out_of_range("no such sub-experiment");
  }

  /// Pools per-feeder metrics of all folds per model (every feeder is tested
  /// exactly once, so pooled row count = dataset-wide eligible feeders).
  std::map<std::string, std::map<std::string, MetricStats>> combined_tables() const {
    std::map<std::string, std::map<std::string, MetricStats>> out;
    std::set<ModelKind> kinds;
    for (const auto& s : subs) kinds.insert(s.model);
    for (ModelKind kind : kinds) {
      std::vector<FeederMetrics> pooled;
      for (const auto& s : subs)
        if (s.model == kind)
          pooled.insert(pooled.end(), s.report.per_feeder.begin(), s.report.per_feeder.end());
      out[model_kind_name(kind)] = aggregate_report(std::move(pooled)).aggregate;
    }
    return out;
  }
};

namespace detail_exp {

struct FeederRows {
  std::vector<std::size_t> rows;                 // SampleSet rows of this feeder
  std::vector<std::int64_t> present_indices;     // grid indices, ascending
};

inline std::map<std::string, FeederRows> rows_by_feeder(const SampleSet& samples) {
  std::map<std::string, FeederRows> out;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const std::string& id =
        samples.feeder_ids()[static_cast<std::size_t>(samples.feeder_of(r))];
    auto& fr = out[id];
    fr.rows.push_back(r);
    fr.present_indices.push_back(samples.step_of(r));
  }
  return out;
}

inline std::uint64_t sub_seed(std::uint64_t base, ModelKind kind, int fold) {
  return Rng::splitmix(base ^ (static_cast<std::uint64_t>(kind) * 131 +
                               static_cast<std::uint64_t>(fold) + 1));
}

}  // namespace detail_exp

/// Runs every (model, fold) sub-experiment: train on the fold's train-feeder
/// samples (with the feeder-disjoint validation carve-out inside train()),
/// predict the test-feeder samples, evaluate all nine metrics. Writes models,
/// estimate CSVs and metric tables under run_dir.
inline ExperimentResult run_experiment(const csv::Dataset& dataset, const AppConfig& cfg,
                                       const std::vector<ModelKind>& models,
                                       const FoldPlan& plan,
                                       const std::filesystem::path& run_dir,
                                       const EstimatorOverride* estimator_override = nullptr) {
  std::filesystem::create_directories(run_dir);
  auto [kept, cleaning] = filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  write_cleaning_report(run_dir / "cleaning_report.csv", cleaning);

  std::set<std::string> kept_set(kept.begin(), kept.end());
  std::vector<MeasurementSeries> kept_series;
  for (const auto& s : dataset.measurements)
    if (kept_set.count(s.feeder_id)) kept_series.push_back(s);
  if (kept_series.empty()) throw std::runtime_error("no feeders survive cleaning");
  for (const auto& f : plan.folds)
    for (const auto& id : f.test_ids)
      if (!kept_set.count(id))
        throw std::invalid_argument("fold plan references unknown or removed feeder " + id);

  SampleSet samples = build_samples(dataset.metadata, kept_series, dataset.weather,
                                    dataset.calendar);
  auto feeder_rows = detail_exp::rows_by_feeder(samples);
  std::map<std::string, const MeasurementSeries*> series_by_id;
  for (const auto& s : kept_series) series_by_id[s.feeder_id] = &s;
  std::map<std::string, std::int32_t> feeder_index;
  for (std::size_t i = 0; i < samples.feeder_ids().size(); ++i)
    feeder_index[samples.feeder_ids()[i]] = static_cast<std::int32_t>(i);

  struct Task {
    ModelKind kind;
    int fold;
  };
  std::vector<Task> tasks;
  for (ModelKind kind : models)
    for (int f = 0; f < plan.k; ++f) tasks.push_back(Task{kind, f});

  ExperimentResult result;
  result.plan = plan;
  result.cleaning = cleaning;
  result.kept_ids = kept;
  result.subs.resize(tasks.size());
  std::filesystem::create_directories(run_dir / "models");
  std::filesystem::create_directories(run_dir / "estimates");

  auto run_task = [&](std::size_t ti) {
    const Task& task = tasks[ti];
    const auto& fold = plan.folds[static_cast<std::size_t>(task.fold)];
    SubExperiment sub;
    sub.model = task.kind;
    sub.fold = task.fold;

    std::vector<std::size_t> train_rows;
    for (const auto& id : fold.train_ids) {
      const auto& fr = feeder_rows.at(id);
      train_rows.insert(train_rows.end(), fr.rows.begin(), fr.rows.end());
    }

    std::map<std::string, std::vector<double>> estimates;  // test feeder -> per present index
    if (estimator_override) {
      for (const auto& id : fold.test_ids)
        estimates[id] = (*estimator_override)(task.fold, id, feeder_rows.at(id).present_indices);
    } else {
      TrainConfig tc = make_train_config(cfg, task.kind,
                                         detail_exp::sub_seed(plan.seed, task.kind, task.fold));
      TrainedModel model = train(samples, train_rows, tc);
      model.config_digest = config_digest(cfg);

      std::set<std::int32_t> test_idx;
      for (const auto& id : fold.test_ids) test_idx.insert(feeder_index.at(id));
      for (std::int32_t f : model.trained_feeders) sub.leakage_touches += test_idx.count(f);

      if (const auto* gbt = std::get_if<GbtModel>(&model.payload))
        sub.trained_rounds = static_cast<std::int64_t>(gbt->trees.size());
      else if (const auto* mlp = std::get_if<MlpModel>(&model.payload))
        sub.trained_rounds = static_cast<std::int64_t>(mlp->validation_log.size());

      save_model(run_dir / "models" /
                     (model_kind_name(task.kind) + "_fold" + std::to_string(task.fold) + ".bin"),
                 model);
      for (const auto& id : fold.test_ids)
        estimates[id] = model.predict_rows(samples, feeder_rows.at(id).rows);
    }

    // per-feeder estimate CSV, then the nine metrics
    std::vector<MeasurementSeries> estimate_series;
    std::vector<FeederMetrics> fold_metrics;
    for (const auto& id : fold.test_ids) {
      const auto& fr = feeder_rows.at(id);
      const MeasurementSeries& truth = *series_by_id.at(id);
      std::vector<double> yhat(static_cast<std::size_t>(truth.grid.n_steps()), 0.0);
      MeasurementSeries est;
      est.feeder_id = id;
      est.grid = truth.grid;
      est.values.assign(yhat.size(), std::nullopt);
      const auto& e = estimates.at(id);
      for (std::size_t i = 0; i < fr.present_indices.size(); ++i) {
        auto j = static_cast<std::size_t>(fr.present_indices[i]);
        yhat[j] = e[i];
        est.values[j] = e[i];
      }
      estimate_series.push_back(std::move(est));
      fold_metrics.push_back(evaluate_feeder(id, truth.values, yhat, truth.grid, cfg.metrics));
    }
    csv::write_measurements(run_dir / "estimates" /
                                (model_kind_name(task.kind) + "_fold" +
                                 std::to_string(task.fold) + ".csv"),
                            estimate_series, "estimate_kw");
    sub.report = aggregate_report(std::move(fold_metrics));
    result.subs[ti] = std::move(sub);
  };

  int workers = std::max(1, cfg.crossval.workers);
  if (workers == 1) {
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        while (true) {
          std::size_t ti = next.fetch_add(1);
          if (ti >= tasks.size()) break;
          run_task(ti);
        }
      });
    for (auto& t : pool) t.join();
  }

  for (const auto& s : result.subs) result.leakage_total += s.leakage_touches;
  return result;
}

// ---- report files -----------------------------------------------------------

inline void write_combined_table(const std::filesystem::path& path,
                                 const ExperimentResult& result) {
  auto out = csv::open_output(path);
  out << "model,metric,stat,value\n";
  for (const auto& [model, table] : result.combined_tables()) {
    for (const auto& metric : metric_names()) {
      const MetricStats& s = table.at(metric);
      out << model << ',' << metric << ",count," << s.count << '\n';
      if (s.count == 0) continue;
      out << model << ',' << metric << ",mean," << csv::format_double(s.mean) << '\n';
      out << model << ',' << metric << ",std," << csv::format_double(s.stddev) << '\n';
      out << model << ',' << metric << ",min," << csv::format_double(s.min) << '\n';
      out << model << ',' << metric << ",q25," << csv::format_double(s.q25) << '\n';
      out << model << ',' << metric << ",median," << csv::format_double(s.median) << '\n';
      out << model << ',' << metric << ",q75," << csv::format_double(s.q75) << '\n';
      out << model << ',' << metric << ",max," << csv::format_double(s.max) << '\n';
    }
  }
}

/// Per-fold means per metric plus the across-fold mean and standard deviation.
inline void write_per_fold_table(const std::filesystem::path& path,
                                 const ExperimentResult& result) {
  auto out = csv::open_output(path);
  out << "model,metric,fold,value\n";
  std::set<ModelKind> kinds;
  for (const auto& s : result.subs) kinds.insert(s.model);
  for (ModelKind kind : kinds) {
    for (const auto& metric : metric_names()) {
      std::vector<double> fold_means;
      for (const auto& s : result.subs) {
        if (s.model != kind) continue;
        const MetricStats& st = s.report.aggregate.at(metric);
        out << model_kind_name(kind) << ',' << metric << ',' << s.fold << ',';
        if (st.count > 0) {
          out << csv::format_double(st.mean);
          fold_means.push_back(st.mean);
        }
        out << '\n';
      }
      if (!fold_means.empty()) {
        MetricStats st = compute_stats(fold_means);
        out << model_kind_name(kind) << ',' << metric << ",mean,"
            << csv::format_double(st.mean) << '\n';
        out << model_kind_name(kind) << ',' << metric << ",std,"
            << csv::format_double(st.stddev) << '\n';
      }
    }
  }
}

inline void write_per_feeder_metrics(const std::filesystem::path& path,
                                     const ExperimentResult& result) {
  auto out = csv::open_output(path);
  out << "model,fold,feeder_id,metric,value,reason\n";
  for (const auto& s : result.subs) {
    for (const auto& m : s.report.per_feeder) {
      for (const auto& name : metric_names()) {
        auto v = metric_value(m, name);
        out << model_kind_name(s.model) << ',' << s.fold << ',' << m.feeder_id << ',' << name
            << ',';
        if (v)
          out << csv::format_double(*v) << ',';
        else
          out << ',' << undefined_reason(m, name);
        out << '\n';
      }
    }
  }
}

inline void write_run_reports(const std::filesystem::path& run_dir,
                              const ExperimentResult& result) {
  write_combined_table(run_dir / "combined_table.csv", result);
  write_per_fold_table(run_dir / "per_fold_table.csv", result);
  write_per_feeder_metrics(run_dir / "per_feeder_metrics.csv", result);
}

inline void write_run_manifest(const std::filesystem::path& run_dir, const AppConfig& cfg,
                               const std::vector<ModelKind>& models, const FoldPlan& plan,
                               const std::filesystem::path& data_dir,
                               const ExperimentResult& result) {
  nlohmann::json j;
  j["format"] = "feederlab-run";
  j["config_digest"] = config_digest(cfg);
  j["config"] = canonical_config_string(cfg);
  j["data_dir"] = data_dir.string();
  nlohmann::json model_names = nlohmann::json::array();
  for (ModelKind k : models) model_names.push_back(model_kind_name(k));
  j["models"] = std::move(model_names);
  j["plan"] = fold_plan_to_json(plan);
  j["kept_feeders"] = result.kept_ids;
  j["leakage_touches"] = result.leakage_total;
  std::ofstream out(run_dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write run manifest");
  out << j.dump(2);
}

// ---- profile export ----------------------------------------------------------

/// Monday of the given ISO week ("2024-W03").
inline Date iso_week_monday(const std::string& iso_week) {
  if (iso_week.size() != 8 || iso_week[4] != '-' || iso_week[5] != 'W')
    throw std::invalid_argument("expected ISO week like 2024-W03: " + iso_week);
  int year = detail::parse_fixed_int(iso_week, 0, 4);
  int week = detail::parse_fixed_int(iso_week, 6, 2);
  if (week < 1 || week > 53) throw std::invalid_argument("ISO week out of range: " + iso_week);
  Date jan4 = Date::from_ymd(year, 1, 4);  // always inside ISO week 1
  Date monday_w1{jan4.days - jan4.weekday()};
  return Date{monday_w1.days + (week - 1) * 7};
}

/// Plot-ready excerpt of one test feeder: measurement (empty on gaps),
/// estimate, temperature and radiation for a full week.
inline void export_profile(const std::filesystem::path& run_dir, const std::string& feeder_id,
                           const std::string& iso_week, ModelKind kind,
                           const std::filesystem::path& out_path) {
  std::ifstream mf(run_dir / "manifest.json");
  if (!mf) throw std::runtime_error("no manifest.json under " + run_dir.string());
  nlohmann::json manifest;
  mf >> manifest;

  int fold = -1;
  const auto& folds = manifest.at("plan").at("folds");
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (const auto& id : folds[f].at("test"))
      if (id.get<std::string>() == feeder_id) fold = static_cast<int>(f);
  }
  if (fold < 0)
    throw std::out_of_range("feeder " + feeder_id + " is not in any fold's test data");

  std::filesystem::path data_dir = manifest.at("data_dir").get<std::string>();
  csv::Dataset dataset = csv::load_dataset(data_dir);
  TrainedModel model = load_model(
      run_dir / "models" / (model_kind_name(kind) + "_fold" + std::to_string(fold) + ".bin"));

  const MeasurementSeries* truth = nullptr;
  for (const auto& s : dataset.measurements)
    if (s.feeder_id == feeder_id) truth = &s;
  auto meta_it = dataset.metadata.find(feeder_id);
  if (!truth || meta_it == dataset.metadata.end())
    throw std::runtime_error("feeder series missing from dataset " + data_dir.string());
  const auto meta = meta_it->second.as_array();

  Date monday = iso_week_monday(iso_week);
  Timestamp from = Timestamp::from(monday);
  auto out = csv::open_output(out_path);
  out << "timestamp,measurement_kw,estimate_kw,temperature_c,radiation_wm2\n";
  FeatureRow x{};
  std::copy(meta.begin(), meta.end(), x.begin());
  for (std::int64_t m = 0; m < 7 * kMinutesPerDay; m += kStepMinutes) {
    Timestamp t = from.plus_minutes(m);
    if (!truth->grid.contains(t)) continue;
    auto ju = static_cast<std::size_t>(truth->grid.timestamp_to_index(t));
    auto wj = static_cast<std::size_t>(dataset.weather.grid.timestamp_to_index(t));
    x[kWeatherOffset + 0] = dataset.weather.global_radiation[wj];
    x[kWeatherOffset + 1] = dataset.weather.air_temperature[wj];
    x[kWeatherOffset + 2] = dataset.weather.precipitation[wj];
    x[kWeatherOffset + 3] = dataset.weather.snow_height[wj];
    auto enc = encode_timestamp(t);
    std::copy(enc.begin(), enc.end(), x.begin() + kTimeOffset);
    const CalendarDay* day = dataset.calendar.find(t.date());
    x[kCalendarOffset + 0] = day && day->is_holiday ? 1.0 : 0.0;
    x[kCalendarOffset + 1] = day && day->is_workday ? 1.0 : 0.0;

    out << t.to_string() << ',';
    if (truth->values[ju]) out << csv::format_double(*truth->values[ju]);
    out << ',' << csv::format_double(model.predict_one(x)) << ','
        << csv::format_double(dataset.weather.air_temperature[wj]) << ','
        << csv::format_double(dataset.weather.global_radiation[wj]) << '\n';
  }
}

}  // namespace feederlab
