#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "feederlab/experiment.hpp"

using namespace feederlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "feederlab_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// small dataset + fast model settings for pipeline tests
AppConfig fast_config() {
  AppConfig cfg;
  cfg.generator.seed = 21;
  cfg.generator.n_feeders = 14;
  cfg.generator.start = Date::parse("2023-01-01");
  cfg.generator.end = Date::parse("2023-01-22");
  cfg.trees.n_estimators = 40;
  cfg.trees.early_stopping_rounds = 10;
  cfg.trees.max_depth = 3;
  cfg.neural.max_epochs = 8;
  cfg.neural.patience = 4;
  cfg.crossval.k = 3;
  cfg.crossval.seed = 5;
  cfg.metrics.min_days = 3;  // short period, keep peak metrics alive
  return cfg;
}

}  // namespace

TEST_CASE("plan_folds partitions feeders into near-equal disjoint test blocks") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("F" + std::to_string(i));

  FoldPlan plan = plan_folds(ids, 5, 3);
  REQUIRE(plan.folds.size() == 5);
  std::set<std::string> seen;
  for (const auto& f : plan.folds) {
    CHECK(f.test_ids.size() == 2);
    CHECK(f.train_ids.size() == 8);
    for (const auto& id : f.test_ids) {
      CHECK(seen.insert(id).second);  // pairwise disjoint
      CHECK_FALSE(std::count(f.train_ids.begin(), f.train_ids.end(), id));
    }
  }
  CHECK(seen.size() == 10);  // union covers everything
}

TEST_CASE("plan_folds is deterministic and distributes the remainder first") {
  std::vector<std::string> ids;
  for (int i = 0; i < 11; ++i) ids.push_back("F" + std::to_string(i));
  FoldPlan a = plan_folds(ids, 5, 17);
  FoldPlan b = plan_folds(ids, 5, 17);
  for (int f = 0; f < 5; ++f)
    CHECK(a.folds[static_cast<std::size_t>(f)].test_ids ==
          b.folds[static_cast<std::size_t>(f)].test_ids);

  std::vector<std::size_t> sizes;
  for (const auto& f : a.folds) sizes.push_back(f.test_ids.size());
  CHECK(sizes == std::vector<std::size_t>{3, 2, 2, 2, 2});

  FoldPlan c = plan_folds(ids, 5, 18);
  bool different = false;
  for (int f = 0; f < 5; ++f)
    if (a.folds[static_cast<std::size_t>(f)].test_ids !=
        c.folds[static_cast<std::size_t>(f)].test_ids)
      different = true;
  CHECK(different);
}

TEST_CASE("plan_folds rejects more folds than feeders") {
  CHECK_THROWS_AS(plan_folds({"a", "b", "c"}, 5, 1), std::invalid_argument);
}

TEST_CASE("a perfect-oracle estimator zeroes every defined metric") {
  auto cfg = fast_config();
  auto dataset = generate_dataset(cfg.generator);
  auto [kept, report] = filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  FoldPlan plan = plan_folds(kept, cfg.crossval.k, cfg.crossval.seed);

  std::map<std::string, const MeasurementSeries*> by_id;
  for (const auto& s : dataset.measurements) by_id[s.feeder_id] = &s;
  EstimatorOverride oracle = [&](int, const std::string& id,
                                 const std::vector<std::int64_t>& idx) {
    std::vector<double> out;
    for (auto j : idx) out.push_back(*by_id.at(id)->values[static_cast<std::size_t>(j)]);
    return out;
  };

  auto dir = temp_dir("oracle_run");
  auto result = run_experiment(dataset, cfg, {ModelKind::kLinear}, plan, dir, &oracle);
  std::size_t feeders_seen = 0;
  for (const auto& sub : result.subs) {
    for (const auto& m : sub.report.per_feeder) {
      ++feeders_seen;
      REQUIRE(*m.mae_kw <= 1e-12);
      REQUIRE(*m.rmse_kw <= 1e-12);
      if (m.mae_norm) REQUIRE(*m.mae_norm <= 1e-12);
      if (m.pmag_c) REQUIRE(*m.pmag_c <= 1e-12);
      if (m.ptime_c) REQUIRE(*m.ptime_c == 0.0);
      if (m.pshape_c) REQUIRE(*m.pshape_c <= 1e-12);
      if (m.pmag_f) REQUIRE(*m.pmag_f <= 1e-12);
      if (m.ptime_f) REQUIRE(*m.ptime_f == 0.0);
      if (m.pshape_f) REQUIRE(*m.pshape_f <= 1e-12);
    }
  }
  CHECK(feeders_seen == kept.size());
}

TEST_CASE("a mean-predictor baseline reproduces the fold mean absolute deviation") {
  auto cfg = fast_config();
  auto dataset = generate_dataset(cfg.generator);
  auto [kept, report] = filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  FoldPlan plan = plan_folds(kept, cfg.crossval.k, cfg.crossval.seed);

  std::map<std::string, const MeasurementSeries*> by_id;
  for (const auto& s : dataset.measurements) by_id[s.feeder_id] = &s;
  std::vector<double> fold_mean(static_cast<std::size_t>(plan.k), 0.0);
  for (int f = 0; f < plan.k; ++f) {
    double sum = 0;
    std::int64_t n = 0;
    for (const auto& id : plan.folds[static_cast<std::size_t>(f)].train_ids)
      for (const auto& v : by_id.at(id)->values)
        if (v) {
          sum += *v;
          ++n;
        }
    fold_mean[static_cast<std::size_t>(f)] = sum / double(n);
  }
  EstimatorOverride baseline = [&](int fold, const std::string&,
                                   const std::vector<std::int64_t>& idx) {
    return std::vector<double>(idx.size(), fold_mean[static_cast<std::size_t>(fold)]);
  };

  auto dir = temp_dir("baseline_run");
  auto result = run_experiment(dataset, cfg, {ModelKind::kLinear}, plan, dir, &baseline);
  for (const auto& sub : result.subs) {
    for (const auto& m : sub.report.per_feeder) {
      const auto& series = *by_id.at(m.feeder_id);
      double sum = 0;
      std::int64_t n = 0;
      for (const auto& v : series.values)
        if (v) {
          sum += std::abs(*v - fold_mean[static_cast<std::size_t>(sub.fold)]);
          ++n;
        }
      REQUIRE(*m.mae_kw == Catch::Approx(sum / double(n)).margin(1e-9));
    }
  }
}

TEST_CASE("run_experiment trains without leakage and writes every artifact") {
  auto cfg = fast_config();
  auto dataset = generate_dataset(cfg.generator);
  auto [kept, report] = filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  FoldPlan plan = plan_folds(kept, cfg.crossval.k, cfg.crossval.seed);

  auto dir = temp_dir("full_run");
  std::vector<ModelKind> models{ModelKind::kLinear, ModelKind::kBoostedTrees};
  auto result = run_experiment(dataset, cfg, models, plan, dir);
  write_run_reports(dir, result);
  write_run_manifest(dir, cfg, models, plan, temp_dir("unused_data"), result);

  CHECK(result.leakage_total == 0);
  CHECK(result.subs.size() == models.size() * static_cast<std::size_t>(plan.k));

  int model_files = 0, estimate_files = 0;
  for (const auto& e : fs::directory_iterator(dir / "models")) model_files += e.is_regular_file();
  for (const auto& e : fs::directory_iterator(dir / "estimates"))
    estimate_files += e.is_regular_file();
  CHECK(model_files == static_cast<int>(result.subs.size()));
  CHECK(estimate_files == static_cast<int>(result.subs.size()));
  CHECK(fs::exists(dir / "combined_table.csv"));
  CHECK(fs::exists(dir / "per_fold_table.csv"));
  CHECK(fs::exists(dir / "per_feeder_metrics.csv"));
  CHECK(fs::exists(dir / "cleaning_report.csv"));

  // combined pooling: per-metric combined count equals the summed fold counts
  auto combined = result.combined_tables();
  for (ModelKind kind : models) {
    for (const auto& metric : metric_names()) {
      std::int64_t fold_sum = 0;
      for (const auto& s : result.subs)
        if (s.model == kind) fold_sum += s.report.aggregate.at(metric).count;
      CHECK(combined.at(model_kind_name(kind)).at(metric).count == fold_sum);
    }
  }
  // every kept feeder is tested exactly once per model
  CHECK(combined.at("linear").at("mae_kw").count == static_cast<std::int64_t>(kept.size()));
}

TEST_CASE("identical config and seed give byte-identical reports") {
  auto cfg = fast_config();
  cfg.crossval.models = {ModelKind::kLinear, ModelKind::kBoostedTrees};
  auto dataset = generate_dataset(cfg.generator);
  auto [kept, report] = filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  FoldPlan plan = plan_folds(kept, cfg.crossval.k, cfg.crossval.seed);

  auto dir_a = temp_dir("det_a");
  auto dir_b = temp_dir("det_b");
  write_run_reports(dir_a, run_experiment(dataset, cfg, cfg.crossval.models, plan, dir_a));
  write_run_reports(dir_b, run_experiment(dataset, cfg, cfg.crossval.models, plan, dir_b));
  for (const char* f : {"combined_table.csv", "per_fold_table.csv", "per_feeder_metrics.csv"})
    REQUIRE(slurp(dir_a / f) == slurp(dir_b / f));
}

TEST_CASE("concurrent workers produce the same reports as a single worker") {
  auto cfg = fast_config();
  auto dataset = generate_dataset(cfg.generator);
  auto [kept, report] = filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  FoldPlan plan = plan_folds(kept, cfg.crossval.k, cfg.crossval.seed);
  std::vector<ModelKind> models{ModelKind::kLinear, ModelKind::kBoostedTrees};

  auto dir_seq = temp_dir("workers_seq");
  auto result_seq = run_experiment(dataset, cfg, models, plan, dir_seq);
  write_run_reports(dir_seq, result_seq);

  cfg.crossval.workers = 3;
  auto dir_par = temp_dir("workers_par");
  auto result_par = run_experiment(dataset, cfg, models, plan, dir_par);
  write_run_reports(dir_par, result_par);

  REQUIRE(slurp(dir_seq / "combined_table.csv") == slurp(dir_par / "combined_table.csv"));
  REQUIRE(slurp(dir_seq / "per_feeder_metrics.csv") == slurp(dir_par / "per_feeder_metrics.csv"));
}

TEST_CASE("export_profile emits a full plot-ready week") {
  auto cfg = fast_config();
  auto data_dir = temp_dir("export_data");
  auto dataset = generate_dataset(cfg.generator);
  csv::write_dataset(data_dir, dataset);
  auto [kept, report] = filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  FoldPlan plan = plan_folds(kept, cfg.crossval.k, cfg.crossval.seed);

  auto dir = temp_dir("export_run");
  std::vector<ModelKind> models{ModelKind::kLinear};
  auto result = run_experiment(dataset, cfg, models, plan, dir);
  write_run_manifest(dir, cfg, models, plan, data_dir, result);

  const std::string feeder = plan.folds[0].test_ids.front();
  auto out = dir / "profile.csv";
  export_profile(dir, feeder, "2023-W02", ModelKind::kLinear, out);

  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "timestamp,measurement_kw,estimate_kw,temperature_c,radiation_wm2");
  int rows = 0, gaps = 0;
  while (std::getline(in, line)) {
    ++rows;
    auto fields = csv::split_line(line);
    REQUIRE(fields.size() == 5);
    if (fields[1].empty()) {
      ++gaps;
      CHECK_FALSE(fields[2].empty());  // estimate present even at measurement gaps
    }
  }
  CHECK(rows == 672);  // 7 x 96
  CHECK(gaps > 0);     // default gap rate leaves holes in a week

  CHECK_THROWS_AS(export_profile(dir, "NOEXIST", "2023-W02", ModelKind::kLinear, out),
                  std::out_of_range);
}

TEST_CASE("a fold plan naming removed feeders is rejected") {
  auto cfg = fast_config();
  auto dataset = generate_dataset(cfg.generator);
  FoldPlan plan;
  plan.k = 1;
  plan.folds.push_back({{}, {"GHOST"}});
  auto dir = temp_dir("ghost_run");
  CHECK_THROWS_AS(run_experiment(dataset, cfg, {ModelKind::kLinear}, plan, dir),
                  std::invalid_argument);
}

TEST_CASE("iso week parsing lands on Mondays") {
  CHECK(iso_week_monday("2023-W01").to_string() == "2023-01-02");
  CHECK(iso_week_monday("2023-W02").to_string() == "2023-01-09");
  CHECK(iso_week_monday("2024-W01").to_string() == "2024-01-01");
  CHECK_THROWS(iso_week_monday("2023-13"));
}
