// feederlab command-line interface: synthetic dataset generation, cleaning,
// featurization, model training, evaluation and the cross-validation runner.

#include <CLI11.hpp>

#include <iostream>

#include "feederlab/config.hpp"
#include "feederlab/datagen.hpp"
#include "feederlab/experiment.hpp"
#include "feederlab/metrics.hpp"
#include "feederlab/models/model.hpp"
#include "feederlab/prep.hpp"

namespace fl = feederlab;
namespace fs = std::filesystem;

namespace {

fl::AppConfig load_config_or_default(const std::string& path) {
  return path.empty() ? fl::AppConfig{} : fl::load_config(path);
}

void cmd_generate(const std::string& config_path, const std::string& out_dir) {
  fl::AppConfig cfg = load_config_or_default(config_path);
  auto dataset = fl::generate_dataset(cfg.generator);
  fl::csv::write_dataset(out_dir, dataset);
  nlohmann::json manifest{{"format", "feederlab-dataset"},
                          {"generator", fl::generator_config_to_json(cfg.generator)},
                          {"config_digest", fl::config_digest(cfg)}};
  std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::binary);
  mf << manifest.dump(2);
  std::cout << "generated " << dataset.measurements.size() << " feeders x "
            << dataset.weather.grid.n_steps() << " steps into " << out_dir << "\n";
}

void cmd_clean(const std::string& in_dir, const std::string& out_dir,
               const std::string& report_path, const std::string& config_path) {
  fl::AppConfig cfg = load_config_or_default(config_path);
  auto dataset = fl::csv::load_dataset(in_dir);
  auto [kept, report] = fl::filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  fl::write_cleaning_report(report_path.empty() ? fs::path(out_dir) / "cleaning_report.csv"
                                                : fs::path(report_path),
                            report);
  fl::csv::Dataset cleaned;
  cleaned.weather = dataset.weather;
  cleaned.calendar = dataset.calendar;
  std::set<std::string> kept_set(kept.begin(), kept.end());
  for (const auto& s : dataset.measurements)
    if (kept_set.count(s.feeder_id)) cleaned.measurements.push_back(s);
  for (const auto& [id, m] : dataset.metadata)
    if (kept_set.count(id)) cleaned.metadata.emplace(id, m);
  fl::csv::write_dataset(out_dir, cleaned);
  std::cout << "kept " << kept.size() << " of " << report.verdicts.size() << " feeders\n";
  for (const auto& [rule, count] : report.removed_by_rule)
    std::cout << "  removed by " << rule << ": " << count << "\n";
}

void cmd_featurize(const std::string& in_dir, const std::string& out_file) {
  auto dataset = fl::csv::load_dataset(in_dir);
  auto samples = fl::build_samples(dataset.metadata, dataset.measurements, dataset.weather,
                                   dataset.calendar);
  fl::write_samples(out_file, samples);
  std::cout << "wrote " << samples.size() << " samples to " << out_file << "\n";
}

void cmd_train(const std::string& samples_path, const std::string& model_name,
               const std::string& config_path, const std::string& out_path,
               std::uint64_t seed) {
  fl::AppConfig cfg = load_config_or_default(config_path);
  auto samples = fl::read_samples(samples_path);
  std::vector<std::size_t> rows(samples.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  fl::TrainConfig tc = fl::make_train_config(cfg, fl::parse_model_kind(model_name), seed);
  fl::TrainedModel model = fl::train(samples, rows, tc);
  model.config_digest = fl::config_digest(cfg);
  fl::save_model(out_path, model);
  std::cout << "trained " << model_name << " on " << samples.size() << " samples -> "
            << out_path << "\n";
}

void cmd_predict(const std::string& model_path, const std::string& samples_path,
                 const std::string& out_path) {
  fl::TrainedModel model = fl::load_model(model_path);
  auto samples = fl::read_samples(samples_path);
  auto out = fl::csv::open_output(out_path);
  out << "feeder_id,timestamp,estimate_kw\n";
  fl::FeatureRow x;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    samples.fill_row(r, x);
    out << samples.feeder_ids()[static_cast<std::size_t>(samples.feeder_of(r))] << ','
        << samples.grid().index_to_timestamp(samples.step_of(r)).to_string() << ','
        << fl::csv::format_double(model.predict_one(x)) << '\n';
  }
  std::cout << "wrote " << samples.size() << " estimates to " << out_path << "\n";
}

void cmd_evaluate(const std::string& truth_path, const std::string& estimates_path,
                  const std::string& out_path, const fl::PeakConfig& peaks) {
  auto truth = fl::csv::read_measurements(truth_path);
  auto estimates = fl::csv::read_measurements(estimates_path, "estimate_kw");
  std::map<std::string, const fl::MeasurementSeries*> est_by_id;
  for (const auto& e : estimates) est_by_id[e.feeder_id] = &e;

  std::vector<fl::FeederMetrics> per_feeder;
  for (const auto& t : truth) {
    auto it = est_by_id.find(t.feeder_id);
    if (it == est_by_id.end())
      throw std::runtime_error("no estimates for feeder " + t.feeder_id);
    const auto& est = *it->second;
    std::vector<double> yhat(static_cast<std::size_t>(t.grid.n_steps()), 0.0);
    for (std::int64_t j = 0; j < t.grid.n_steps(); ++j) {
      if (!t.values[static_cast<std::size_t>(j)]) continue;
      fl::Timestamp ts = t.grid.index_to_timestamp(j);
      if (!est.grid.contains(ts) ||
          !est.values[static_cast<std::size_t>(est.grid.timestamp_to_index(ts))])
        throw std::runtime_error("feeder " + t.feeder_id + " misses an estimate at " +
                                 ts.to_string());
      yhat[static_cast<std::size_t>(j)] =
          *est.values[static_cast<std::size_t>(est.grid.timestamp_to_index(ts))];
    }
    per_feeder.push_back(fl::evaluate_feeder(t.feeder_id, t.values, yhat, t.grid, peaks));
  }
  fl::MetricReport report = fl::aggregate_report(std::move(per_feeder));
  fl::write_report_csv(out_path, report);
  std::cout << "evaluated " << report.per_feeder.size() << " feeders -> " << out_path << "\n";
}

void cmd_crossval(const std::string& data_dir, const std::string& models_arg, int k,
                  std::uint64_t seed, const std::string& out_dir,
                  const std::string& config_path, int workers) {
  fl::AppConfig cfg = load_config_or_default(config_path);
  if (k > 0) cfg.crossval.k = k;
  cfg.crossval.seed = seed;
  if (workers > 0) cfg.crossval.workers = workers;
  std::vector<fl::ModelKind> models =
      models_arg.empty() ? cfg.crossval.models : fl::detail_config::parse_model_list(models_arg);

  auto dataset = fl::csv::load_dataset(data_dir);
  auto [kept, report] = fl::filter_feeders(dataset.metadata, dataset.measurements, cfg.cleaning);
  fl::FoldPlan plan = fl::plan_folds(kept, cfg.crossval.k, cfg.crossval.seed);
  auto result = fl::run_experiment(dataset, cfg, models, plan, out_dir);
  fl::write_run_reports(out_dir, result);
  fl::write_run_manifest(out_dir, cfg, models, plan, data_dir, result);
  {
    std::ofstream pf(fs::path(out_dir) / "plan.json", std::ios::binary);
    pf << fl::fold_plan_to_json(plan).dump(2);
  }
  std::cout << "ran " << result.subs.size() << " sub-experiments over " << kept.size()
            << " feeders; leakage touches: " << result.leakage_total << "\n";
  for (const auto& [model, table] : result.combined_tables())
    std::cout << "  " << model << " mean MAE = "
              << fl::csv::format_double(table.at("mae_kw").mean) << " kW\n";
}

// Rebuilds the three report CSVs from per_feeder_metrics.csv of a run.
void cmd_report(const std::string& run_dir, const std::string& format,
                const std::string& out_dir) {
  if (format != "csv") throw std::invalid_argument("unsupported report format: " + format);
  auto in = fl::csv::open_input(fs::path(run_dir) / "per_feeder_metrics.csv");
  std::string line;
  std::getline(in, line);
  fl::csv::expect_header(fl::csv::strip_cr(line), "model,fold,feeder_id,metric,value,reason",
                         fs::path(run_dir) / "per_feeder_metrics.csv");
  std::map<std::pair<std::string, int>, std::map<std::string, fl::FeederMetrics>> by_sub;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = fl::csv::split_line(fl::csv::strip_cr(line));
    if (f.size() != 6) throw std::runtime_error("malformed per_feeder_metrics.csv row");
    auto key = std::make_pair(std::string(f[0]),
                              static_cast<int>(fl::csv::parse_double(f[1])));
    auto& fm = by_sub[key][std::string(f[2])];
    fm.feeder_id = std::string(f[2]);
    if (f[4].empty()) continue;
    double v = fl::csv::parse_double(f[4]);
    std::string metric(f[3]);
    if (metric == "mae_kw") fm.mae_kw = v;
    else if (metric == "mae_norm") fm.mae_norm = v;
    else if (metric == "rmse_kw") fm.rmse_kw = v;
    else if (metric == "pmag_c") { fm.pmag_c = v; fm.eligible_days_c = 10; }
    else if (metric == "pmag_f") { fm.pmag_f = v; fm.eligible_days_f = 10; }
    else if (metric == "ptime_c") fm.ptime_c = v;
    else if (metric == "ptime_f") fm.ptime_f = v;
    else if (metric == "pshape_c") fm.pshape_c = v;
    else if (metric == "pshape_f") fm.pshape_f = v;
  }
  fl::ExperimentResult result;
  for (auto& [key, feeders] : by_sub) {
    fl::SubExperiment sub;
    sub.model = fl::parse_model_kind(key.first);
    sub.fold = key.second;
    std::vector<fl::FeederMetrics> ms;
    for (auto& [id, fm] : feeders) ms.push_back(fm);
    sub.report = fl::aggregate_report(std::move(ms));
    result.subs.push_back(std::move(sub));
  }
  std::sort(result.subs.begin(), result.subs.end(), [](const auto& a, const auto& b) {
    if (a.model != b.model) return static_cast<int>(a.model) < static_cast<int>(b.model);
    return a.fold < b.fold;
  });
  fs::path out = out_dir.empty() ? fs::path(run_dir) : fs::path(out_dir);
  fl::write_combined_table(out / "combined_table.csv", result);
  fl::write_per_fold_table(out / "per_fold_table.csv", result);
  fl::write_per_feeder_metrics(out / "per_feeder_metrics.csv", result);
  std::cout << "reports written to " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feeder metadata pseudo-measurement toolkit"};
  app.require_subcommand(1);

  std::string config_path, in_dir, out_dir, out_file, report_path;
  std::string samples_path, model_name = "boosted_trees", model_path, truth_path, estimates_path;
  std::string data_dir, models_arg, run_dir, feeder_id, iso_week, format = "csv";
  std::uint64_t seed = 42;
  int k = 0, workers = 0;
  fl::PeakConfig peaks;

  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "config file");
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  auto* clean = app.add_subcommand("clean", "apply plausibility filters");
  clean->add_option("--in", in_dir)->required();
  clean->add_option("--out", out_dir)->required();
  clean->add_option("--report", report_path, "cleaning report CSV path");
  clean->add_option("--config", config_path);

  auto* feat = app.add_subcommand("featurize", "emit model samples as CSV");
  feat->add_option("--in", in_dir)->required();
  feat->add_option("--out", out_file)->required();

  auto* train = app.add_subcommand("train", "train one model on a samples file");
  train->add_option("--samples", samples_path)->required();
  train->add_option("--model", model_name, "linear|neural|boosted_trees")->required();
  train->add_option("--config", config_path);
  train->add_option("--out", out_file)->required();
  train->add_option("--seed", seed);

  auto* predict = app.add_subcommand("predict", "predict estimates with a trained model");
  predict->add_option("--model", model_path)->required();
  predict->add_option("--samples", samples_path)->required();
  predict->add_option("--out", out_file)->required();

  auto* eval = app.add_subcommand("evaluate", "evaluate estimates against ground truth");
  eval->add_option("--truth", truth_path)->required();
  eval->add_option("--estimates", estimates_path)->required();
  eval->add_option("--out", out_file)->required();
  eval->add_option("--peak-threshold-kw", peaks.threshold_kw);
  eval->add_option("--min-peak-days", peaks.min_days);
  eval->add_option("--shape-window-h", peaks.shape_window_h);

  auto* cv = app.add_subcommand("crossval", "feeder-wise k-fold cross-validation");
  cv->add_option("--data", data_dir)->required();
  cv->add_option("--models", models_arg, "comma-separated model kinds");
  cv->add_option("--k", k);
  cv->add_option("--seed", seed);
  cv->add_option("--out", run_dir)->required();
  cv->add_option("--config", config_path);
  cv->add_option("--workers", workers);

  auto* rep = app.add_subcommand("report", "emit metric tables for a run");
  rep->add_option("--run", run_dir)->required();
  rep->add_option("--format", format);
  rep->add_option("--out", out_dir);

  auto* exp = app.add_subcommand("export-profile", "export one feeder week as CSV");
  exp->add_option("--run", run_dir)->required();
  exp->add_option("--feeder", feeder_id)->required();
  exp->add_option("--week", iso_week, "ISO week, e.g. 2023-W05")->required();
  exp->add_option("--model", model_name);
  exp->add_option("--out", out_file);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) cmd_generate(config_path, out_dir);
    else if (clean->parsed()) cmd_clean(in_dir, out_dir, report_path, config_path);
    else if (feat->parsed()) cmd_featurize(in_dir, out_file);
    else if (train->parsed()) cmd_train(samples_path, model_name, config_path, out_file, seed);
    else if (predict->parsed()) cmd_predict(model_path, samples_path, out_file);
    else if (eval->parsed()) cmd_evaluate(truth_path, estimates_path, out_file, peaks);
    else if (cv->parsed()) cmd_crossval(data_dir, models_arg, k, seed, run_dir, config_path, workers);
    else if (rep->parsed()) cmd_report(run_dir, format, out_dir);
    else if (exp->parsed()) {
      std::string out = out_file.empty() ? feeder_id + "_" + iso_week + ".csv" : out_file;
      fl::export_profile(run_dir, feeder_id, iso_week, fl::parse_model_kind(model_name), out);
      std::cout << "profile written to " << out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
