#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "feederlab/prep.hpp"
#include "feederlab/rng.hpp"

namespace feederlab {

enum class ModelKind { kLinear, kNeural, kBoostedTrees };

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kLinear: return "linear";
    case ModelKind::kNeural: return "neural";
    case ModelKind::kBoostedTrees: return "boosted_trees";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "linear") return ModelKind::kLinear;
  if (s == "neural") return ModelKind::kNeural;
  if (s == "boosted_trees") return ModelKind::kBoostedTrees;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

struct LinearConfig {
  double penalty_strength = 1.0;  // elastic net lambda
  double l1_ratio = 0.5;
  double tol = 1e-6;              // coordinate-change stopping tolerance
  int max_sweeps = 5000;
};

struct NeuralConfig {
  int hidden_size = 20;
  double learning_rate = 1e-3;
  int batch_size = 256;
  int patience = 10;   // validation checks without improvement before stopping
  int max_epochs = 100;
};

struct GbtConfig {
  int n_estimators = 1500;
  double learning_rate = 0.05;
  double subsample = 0.7;
  double colsample_bylevel = 0.5;
  int early_stopping_rounds = 30;
  int max_depth = 6;
  double min_gain = 1e-12;
};

struct TrainConfig {
  ModelKind kind = ModelKind::kBoostedTrees;
  std::uint64_t seed = 0;
  double validation_fraction = 0.125;
  LinearConfig linear;
  NeuralConfig neural;
  GbtConfig trees;

  void validate() const {
    if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
      throw std::invalid_argument("validation_fraction must be in (0, 0.5)");
    if (trees.n_estimators < 1) throw std::invalid_argument("n_estimators must be >= 1");
  }
};

namespace detail_models {

/// Splits rows into (fit, validation) with feeder-disjoint membership:
/// validation_fraction of the distinct feeders, at least one on each side.
struct RowSplit {
  std::vector<std::size_t> fit_rows;
  std::vector<std::size_t> val_rows;
  std::vector<std::int32_t> val_feeders;
};

inline RowSplit split_validation_feeders(const SampleSet& samples,
                                         const std::vector<std::size_t>& rows,
                                         double validation_fraction, std::uint64_t seed) {
  std::vector<std::int32_t> feeders;
  for (std::size_t r : rows) feeders.push_back(samples.feeder_of(r));
  std::sort(feeders.begin(), feeders.end());
  feeders.erase(std::unique(feeders.begin(), feeders.end()), feeders.end());
  if (feeders.size() < 2)
    throw std::invalid_argument("training requires at least 2 feeders");

  Rng rng(Rng::splitmix(seed) ^ 0x76616c6964ULL);
  rng.shuffle(feeders);
  auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(feeders.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, feeders.size() - 1);

  std::vector<bool> is_val_feeder;
  std::int32_t max_feeder = 0;
  for (auto f : feeders) max_feeder = std::max(max_feeder, f);
  is_val_feeder.assign(static_cast<std::size_t>(max_feeder) + 1, false);
  RowSplit split;
  for (std::size_t i = 0; i < n_val; ++i) {
    is_val_feeder[static_cast<std::size_t>(feeders[i])] = true;
    split.val_feeders.push_back(feeders[i]);
  }
  std::sort(split.val_feeders.begin(), split.val_feeders.end());
  for (std::size_t r : rows) {
    if (is_val_feeder[static_cast<std::size_t>(samples.feeder_of(r))])
      split.val_rows.push_back(r);
    else
      split.fit_rows.push_back(r);
  }
  return split;
}

inline void validate_training_rows(const SampleSet& samples,
                                   const std::vector<std::size_t>& rows) {
  FeatureRow buf;
  std::vector<bool> feeder_seen(samples.feeder_count(), false);
  std::vector<bool> step_seen(static_cast<std::size_t>(samples.grid().n_steps()), false);
  for (std::size_t r : rows) {
    if (!std::isfinite(samples.target(r)))
      throw std::invalid_argument("non-finite training target");
    auto f = static_cast<std::size_t>(samples.feeder_of(r));
    auto s = static_cast<std::size_t>(samples.step_of(r));
    if (feeder_seen[f] && step_seen[s]) continue;  // factored features already checked
    feeder_seen[f] = true;
    step_seen[s] = true;
    samples.fill_row(r, buf);
    for (double v : buf)
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
  }
}

}  // namespace detail_models

}  // namespace feederlab
