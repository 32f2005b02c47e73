#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "feederlab/datagen.hpp"
#include "feederlab/metrics.hpp"
#include "feederlab/models/common.hpp"
#include "feederlab/prep.hpp"

namespace feederlab {

struct CrossvalConfig {
  int k = 5;
  std::uint64_t seed = 42;
  double validation_fraction = 0.125;
  std::vector<ModelKind> models = {ModelKind::kLinear, ModelKind::kNeural,
                                   ModelKind::kBoostedTrees};
  int workers = 1;
};

/// Everything a run needs, file-configurable through INI-style sections
/// [generator], [cleaning], [models.*], [metrics] and [crossval].
struct AppConfig {
  GeneratorConfig generator;
  CleaningConfig cleaning;
  PeakConfig metrics;
  LinearConfig linear;
  NeuralConfig neural;
  GbtConfig trees;
  CrossvalConfig crossval;
};

namespace detail_config {

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<ModelKind> parse_model_list(const std::string& value) {
  std::vector<ModelKind> kinds;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) kinds.push_back(parse_model_kind(item));
  }
  if (kinds.empty()) throw std::invalid_argument("empty model list");
  return kinds;
}

inline CategorySpec parse_category_spec(const std::string& value) {
  std::stringstream ss(value);
  CategorySpec spec;
  if (!(ss >> spec.prevalence >> spec.lo >> spec.hi))
    throw std::invalid_argument("category spec needs 'prevalence lo hi': " + value);
  std::string rest;
  if (ss >> rest) throw std::invalid_argument("trailing tokens in category spec: " + value);
  return spec;
}

}  // namespace detail_config

/// Parses the config text. Unknown sections or keys are errors.
inline AppConfig parse_config_text(const std::string& text) {
  AppConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = detail_config::trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw std::invalid_argument("malformed section at line " +
                                                       std::to_string(line_no));
      section = s.substr(1, s.size() - 2);
      if (section != "generator" && section != "cleaning" && section != "metrics" &&
          section != "crossval" && section != "models.linear" && section != "models.neural" &&
          section != "models.boosted_trees")
        throw std::invalid_argument("unknown config section [" + section + "]");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("expected key=value at line " + std::to_string(line_no));
    std::string key = detail_config::trim(s.substr(0, eq));
    std::string value = detail_config::trim(s.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("key '" + key + "' outside any section");

    auto d = [&] { return csv::parse_double(value); };
    auto i = [&] { return static_cast<int>(std::llround(csv::parse_double(value))); };
    auto u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };

    bool known = true;
    if (section == "generator") {
      if (key == "seed") cfg.generator.seed = u64();
      else if (key == "n_feeders") cfg.generator.n_feeders = i();
      else if (key == "start_date") cfg.generator.start = Date::parse(value);
      else if (key == "end_date") cfg.generator.end = Date::parse(value);
      else if (key == "noise_level") cfg.generator.noise_level = d();
      else if (key == "gap_rate") cfg.generator.gap_rate = d();
      else if (key.starts_with("category_")) {
        std::string name = key.substr(9);
        known = false;
        for (int c = 0; c < FeederMetadata::kCategoryCount; ++c) {
          if (name == FeederMetadata::category_names()[static_cast<std::size_t>(c)]) {
            cfg.generator.categories[static_cast<std::size_t>(c)] =
                detail_config::parse_category_spec(value);
            known = true;
            break;
          }
        }
      } else known = false;
    } else if (section == "cleaning") {
      if (key == "physical_limit_kw") cfg.cleaning.physical_limit_kw = d();
      else known = false;
    } else if (section == "metrics") {
      if (key == "peak_threshold_kw") cfg.metrics.threshold_kw = d();
      else if (key == "min_peak_days") cfg.metrics.min_days = i();
      else if (key == "shape_window_h") cfg.metrics.shape_window_h = d();
      else known = false;
    } else if (section == "models.linear") {
      if (key == "penalty_strength") cfg.linear.penalty_strength = d();
      else if (key == "l1_ratio") cfg.linear.l1_ratio = d();
      else if (key == "tol") cfg.linear.tol = d();
      else if (key == "max_sweeps") cfg.linear.max_sweeps = i();
      else known = false;
    } else if (section == "models.neural") {
      if (key == "hidden_size") cfg.neural.hidden_size = i();
      else if (key == "learning_rate") cfg.neural.learning_rate = d();
      else if (key == "batch_size") cfg.neural.batch_size = i();
      else if (key == "patience") cfg.neural.patience = i();
      else if (key == "max_epochs") cfg.neural.max_epochs = i();
      else known = false;
    } else if (section == "models.boosted_trees") {
      if (key == "n_estimators") cfg.trees.n_estimators = i();
      else if (key == "learning_rate") cfg.trees.learning_rate = d();
      else if (key == "subsample") cfg.trees.subsample = d();
      else if (key == "colsample_bylevel") cfg.trees.colsample_bylevel = d();
      else if (key == "early_stopping_rounds") cfg.trees.early_stopping_rounds = i();
      else if (key == "max_depth") cfg.trees.max_depth = i();
      else known = false;
    } else if (section == "crossval") {
      if (key == "k") cfg.crossval.k = i();
      else if (key == "seed") cfg.crossval.seed = u64();
      else if (key == "validation_fraction") cfg.crossval.validation_fraction = d();
      else if (key == "models") cfg.crossval.models = detail_config::parse_model_list(value);
      else if (key == "workers") cfg.crossval.workers = i();
      else known = false;
    }
    if (!known)
      throw std::invalid_argument("unknown key '" + key + "' in section [" + section + "]");
  }
  cfg.generator.validate();
  return cfg;
}

inline AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical rendering of every setting; digest input and rerun record.
inline std::string canonical_config_string(const AppConfig& cfg) {
  std::ostringstream out;
  auto f = csv::format_double;
  out << "[generator]\n"
      << "seed = " << cfg.generator.seed << "\n"
      << "n_feeders = " << cfg.generator.n_feeders << "\n"
      << "start_date = " << cfg.generator.start.to_string() << "\n"
      << "end_date = " << cfg.generator.end.to_string() << "\n"
      << "noise_level = " << f(cfg.generator.noise_level) << "\n"
      << "gap_rate = " << f(cfg.generator.gap_rate) << "\n";
  for (int c = 0; c < FeederMetadata::kCategoryCount; ++c) {
    const auto& s = cfg.generator.categories[static_cast<std::size_t>(c)];
    out << "category_" << FeederMetadata::category_names()[static_cast<std::size_t>(c)] << " = "
        << f(s.prevalence) << ' ' << f(s.lo) << ' ' << f(s.hi) << "\n";
  }
  out << "[cleaning]\n"
      << "physical_limit_kw = " << f(cfg.cleaning.physical_limit_kw) << "\n"
      << "[metrics]\n"
      << "peak_threshold_kw = " << f(cfg.metrics.threshold_kw) << "\n"
      << "min_peak_days = " << cfg.metrics.min_days << "\n"
      << "shape_window_h = " << f(cfg.metrics.shape_window_h) << "\n"
      << "[models.linear]\n"
      << "penalty_strength = " << f(cfg.linear.penalty_strength) << "\n"
      << "l1_ratio = " << f(cfg.linear.l1_ratio) << "\n"
      << "tol = " << f(cfg.linear.tol) << "\n"
      << "max_sweeps = " << cfg.linear.max_sweeps << "\n"
      << "[models.neural]\n"
      << "hidden_size = " << cfg.neural.hidden_size << "\n"
      << "learning_rate = " << f(cfg.neural.learning_rate) << "\n"
      << "batch_size = " << cfg.neural.batch_size << "\n"
      << "patience = " << cfg.neural.patience << "\n"
      << "max_epochs = " << cfg.neural.max_epochs << "\n"
      << "[models.boosted_trees]\n"
      << "n_estimators = " << cfg.trees.n_estimators << "\n"
      << "learning_rate = " << f(cfg.trees.learning_rate) << "\n"
      << "subsample = " << f(cfg.trees.subsample) << "\n"
      << "colsample_bylevel = " << f(cfg.trees.colsample_bylevel) << "\n"
      << "early_stopping_rounds = " << cfg.trees.early_stopping_rounds << "\n"
      << "max_depth = " << cfg.trees.max_depth << "\n"
      << "[crossval]\n"
      << "k = " << cfg.crossval.k << "\n"
      << "seed = " << cfg.crossval.seed << "\n"
      << "validation_fraction = " << f(cfg.crossval.validation_fraction) << "\n"
      << "models = ";
  for (std::size_t i = 0; i < cfg.crossval.models.size(); ++i)
    out << (i ? "," : "") << model_kind_name(cfg.crossval.models[i]);
  out << "\n"
      << "workers = " << cfg.crossval.workers << "\n";
  return out.str();
}

inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_digest(const AppConfig& cfg) {
  return fnv1a_hex(canonical_config_string(cfg));
}

inline TrainConfig make_train_config(const AppConfig& cfg, ModelKind kind, std::uint64_t seed) {
  TrainConfig tc;
  tc.kind = kind;
  tc.seed = seed;
  tc.validation_fraction = cfg.crossval.validation_fraction;
  tc.linear = cfg.linear;
  tc.neural = cfg.neural;
  tc.trees = cfg.trees;
  return tc;
}

}  // namespace feederlab
