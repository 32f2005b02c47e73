#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "feederlab/models/common.hpp"

namespace feederlab {

/// Regression tree in implicit-heap layout: children of slot s are 2s+1 and
/// 2s+2. A row goes right iff float(feature) >= threshold.
struct Tree {
  int max_depth = 0;
  std::vector<std::int16_t> split_feature;  // -1 leaf, -2 unused slot
  std::vector<float> threshold;
  std::vector<double> value;  // leaf value: mean residual of the leaf's rows

  template <class FeatureAt>
  double predict(FeatureAt&& feature_at) const {
    std::size_t slot = 0;
    while (split_feature[slot] >= 0) {
      bool right = static_cast<float>(feature_at(split_feature[slot])) >= threshold[slot];
      slot = 2 * slot + 1 + (right ? 1 : 0);
    }
    return value[slot];
  }
};

struct GbtRoundConfig {
  int max_depth = 6;
  double subsample = 1.0;
  double colsample_bylevel = 1.0;
  double min_gain = 1e-12;
  std::uint64_t seed = 0;
};

namespace detail_gbt {

struct SortedColumn {
  std::vector<std::uint32_t> rows;  // row ids ordered by (float value, row id)
  std::vector<float> vals;
};

template <class FeatureAt>
SortedColumn sort_column(const std::vector<std::uint32_t>& rows, int col, FeatureAt&& feature_at) {
  std::vector<std::pair<float, std::uint32_t>> pairs;
  pairs.reserve(rows.size());
  for (std::uint32_t r : rows) pairs.emplace_back(static_cast<float>(feature_at(r, col)), r);
  std::sort(pairs.begin(), pairs.end());
  SortedColumn sc;
  sc.rows.reserve(pairs.size());
  sc.vals.reserve(pairs.size());
  for (const auto& [v, r] : pairs) {
    sc.vals.push_back(v);
    sc.rows.push_back(r);
  }
  return sc;
}

// Strictly above lo and at most hi, so threshold routing reproduces the
// scan-order partition exactly.
inline float split_midpoint(float lo, float hi) {
  auto mid = static_cast<float>((static_cast<double>(lo) + static_cast<double>(hi)) * 0.5);
  if (!(mid > lo)) mid = std::nextafterf(lo, std::numeric_limits<float>::infinity());
  return mid;
}

inline std::vector<int> sample_columns(int n_cols, double colsample, Rng& rng) {
  auto k = static_cast<int>(std::llround(colsample * n_cols));
  k = std::clamp(k, 1, n_cols);
  std::vector<int> cols(static_cast<std::size_t>(n_cols));
  for (int i = 0; i < n_cols; ++i) cols[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_cols - i)));
    std::swap(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
  }
  cols.resize(static_cast<std::size_t>(k));
  std::sort(cols.begin(), cols.end());
  return cols;
}

/// Level-wise greedy variance-reduction builder over presorted columns.
/// node_of must be -1 everywhere except the sampled rows (node 0); live is
/// the sampled row list and is consumed.
template <class FeatureAt>
Tree build_tree(const std::vector<SortedColumn>& cols, FeatureAt&& feature_at,
                const std::vector<double>& residual_exact, const std::vector<float>& residual_f,
                std::vector<std::int16_t>& node_of, std::vector<std::uint32_t>& live,
                int max_depth, double colsample_bylevel, double min_gain, Rng& rng) {
  const auto n_cols = static_cast<int>(cols.size());
  const std::size_t n_slots = (static_cast<std::size_t>(2) << max_depth) - 1;
  Tree tree;
  tree.max_depth = max_depth;
  tree.split_feature.assign(n_slots, -2);
  tree.threshold.assign(n_slots, 0.0f);
  tree.value.assign(n_slots, 0.0);

  std::vector<double> leaf_sum(n_slots, 0.0);
  std::vector<std::int64_t> leaf_cnt(n_slots, 0);
  auto finalize_leaf = [&](std::size_t slot, std::uint32_t row) {
    leaf_sum[slot] += residual_exact[row];
    leaf_cnt[slot] += 1;
  };

  for (int level = 0; level < max_depth && !live.empty(); ++level) {
    const int n_nodes = 1 << level;
    const std::size_t level_base = (static_cast<std::size_t>(1) << level) - 1;
    std::vector<double> tot_sum(static_cast<std::size_t>(n_nodes), 0.0);
    std::vector<std::int64_t> tot_cnt(static_cast<std::size_t>(n_nodes), 0);
    for (std::uint32_t row : live) {
      auto n = node_of[row];
      tot_sum[static_cast<std::size_t>(n)] += residual_f[row];
      tot_cnt[static_cast<std::size_t>(n)] += 1;
    }

    std::vector<double> best_gain(static_cast<std::size_t>(n_nodes), min_gain);
    std::vector<int> best_feat(static_cast<std::size_t>(n_nodes), -1);
    std::vector<float> best_thr(static_cast<std::size_t>(n_nodes), 0.0f);

    std::vector<double> run_sum(static_cast<std::size_t>(n_nodes));
    std::vector<std::int64_t> run_cnt(static_cast<std::size_t>(n_nodes));
    std::vector<float> last_val(static_cast<std::size_t>(n_nodes));

    for (int f : sample_columns(n_cols, colsample_bylevel, rng)) {
      std::fill(run_sum.begin(), run_sum.end(), 0.0);
      std::fill(run_cnt.begin(), run_cnt.end(), 0);
      const auto& sc = cols[static_cast<std::size_t>(f)];
      const std::uint32_t* rows_p = sc.rows.data();
      const float* vals_p = sc.vals.data();
      const std::size_t n_sorted = sc.rows.size();
      for (std::size_t i = 0; i < n_sorted; ++i) {
        std::uint32_t row = rows_p[i];
        int node = node_of[row];
        if (node < 0) continue;
        auto nu = static_cast<std::size_t>(node);
        float v = vals_p[i];
        if (run_cnt[nu] > 0 && v > last_val[nu]) {
          double ls = run_sum[nu];
          auto lc = static_cast<double>(run_cnt[nu]);
          double ts = tot_sum[nu];
          auto tc = static_cast<double>(tot_cnt[nu]);
          double gain = ls * ls / lc + (ts - ls) * (ts - ls) / (tc - lc) - ts * ts / tc;
          if (gain > best_gain[nu]) {
            best_gain[nu] = gain;
            best_feat[nu] = f;
            best_thr[nu] = split_midpoint(last_val[nu], v);
          }
        }
        run_sum[nu] += residual_f[row];
        run_cnt[nu] += 1;
        last_val[nu] = v;
      }
    }

    bool any_split = false;
    for (int n = 0; n < n_nodes; ++n) {
      if (best_feat[static_cast<std::size_t>(n)] < 0) continue;
      any_split = true;
      std::size_t slot = level_base + static_cast<std::size_t>(n);
      tree.split_feature[slot] = static_cast<std::int16_t>(best_feat[static_cast<std::size_t>(n)]);
      tree.threshold[slot] = best_thr[static_cast<std::size_t>(n)];
    }

    std::size_t kept = 0;
    for (std::uint32_t row : live) {
      auto n = static_cast<std::size_t>(node_of[row]);
      std::size_t slot = level_base + n;
      if (tree.split_feature[slot] >= 0) {
        bool right = static_cast<float>(feature_at(row, tree.split_feature[slot])) >=
                     tree.threshold[slot];
        node_of[row] = static_cast<std::int16_t>(2 * n + (right ? 1 : 0));
        live[kept++] = row;
      } else {
        finalize_leaf(slot, row);
        node_of[row] = -1;
      }
    }
    live.resize(kept);
    if (!any_split) break;
  }

  // Rows surviving to max_depth end in bottom-level leaves.
  const std::size_t bottom_base = (static_cast<std::size_t>(1) << max_depth) - 1;
  for (std::uint32_t row : live) {
    finalize_leaf(bottom_base + static_cast<std::size_t>(node_of[row]), row);
    node_of[row] = -1;
  }
  live.clear();

  for (std::size_t slot = 0; slot < n_slots; ++slot) {
    if (leaf_cnt[slot] > 0) {
      tree.split_feature[slot] = -1;
      tree.value[slot] = leaf_sum[slot] / static_cast<double>(leaf_cnt[slot]);
    }
  }
  if (tree.split_feature[0] == -2) tree.split_feature[0] = -1;  // empty root
  return tree;
}

}  // namespace detail_gbt

/// One boosting round: greedy variance-reduction tree on a row subsample with
/// per-level feature subsampling. Leaf values are mean residuals; the caller
/// scales the tree by the learning rate when adding it to the ensemble.
inline Tree gbt_fit_round(const std::vector<std::vector<double>>& features,
                          const std::vector<double>& residuals, const GbtRoundConfig& cfg) {
  if (features.size() != residuals.size())
    throw std::invalid_argument("feature/residual row counts differ");
  for (double r : residuals)
    if (!std::isfinite(r)) throw std::invalid_argument("non-finite residual");
  const auto n = static_cast<std::uint32_t>(features.size());
  const int n_cols = features.empty() ? 0 : static_cast<int>(features.front().size());
  auto feature_at = [&](std::uint32_t row, int col) { return features[row][static_cast<std::size_t>(col)]; };

  Rng rng(Rng::splitmix(cfg.seed) ^ 0x67627472ULL);
  std::vector<std::uint32_t> all_rows(n);
  for (std::uint32_t i = 0; i < n; ++i) all_rows[i] = i;
  auto k = static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, n > 0 ? 1 : 0, n);
  std::vector<std::uint32_t> sampled = all_rows;
  for (std::size_t i = 0; i < k && i + 1 < sampled.size(); ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(sampled.size() - i));
    std::swap(sampled[i], sampled[j]);
  }
  sampled.resize(k);

  std::vector<detail_gbt::SortedColumn> cols;
  cols.reserve(static_cast<std::size_t>(n_cols));
  for (int c = 0; c < n_cols; ++c) cols.push_back(detail_gbt::sort_column(all_rows, c, feature_at));

  std::vector<float> residual_f(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) residual_f[i] = static_cast<float>(residuals[i]);
  std::vector<std::int16_t> node_of(features.size(), -1);
  for (std::uint32_t r : sampled) node_of[r] = 0;

  return detail_gbt::build_tree(cols, feature_at, residuals, residual_f, node_of, sampled,
                                cfg.max_depth, cfg.colsample_bylevel, cfg.min_gain, rng);
}

struct GbtTrainLog {
  std::vector<double> val_loss;         // MSE on the validation feeders per round
  std::vector<double> fit_loss;         // MSE on all fit rows after the round
  std::vector<double> sub_loss_before;  // round subsample, before adding the tree
  std::vector<double> sub_loss_after;
  int best_round = -1;
};

/// Gradient-boosted tree ensemble for squared loss. The ensemble starts from
/// zero; predictions are learning_rate times the sum of tree outputs.
struct GbtModel {
  double learning_rate = 0.05;
  std::vector<Tree> trees;
  GbtTrainLog log;

  double predict_one(const FeatureRow& x) const {
    double acc = 0.0;
    for (const auto& t : trees)
      acc += t.predict([&](int col) { return x[static_cast<std::size_t>(col)]; });
    return learning_rate * acc;
  }
};

/// Trains with per-round row subsampling, per-level column subsampling and
/// early stopping on a feeder-disjoint validation split; the ensemble is
/// truncated to the best validation round.
inline GbtModel train_gbt(const SampleSet& samples, const std::vector<std::size_t>& rows,
                          const GbtConfig& cfg, double validation_fraction, std::uint64_t seed) {
  auto split = detail_models::split_validation_feeders(samples, rows, validation_fraction, seed);
  if (split.fit_rows.empty() || split.val_rows.empty())
    throw std::invalid_argument("training split produced an empty side");

  std::vector<std::uint32_t> fit_rows(split.fit_rows.begin(), split.fit_rows.end());
  std::vector<std::uint32_t> val_rows(split.val_rows.begin(), split.val_rows.end());
  auto feature_at = [&samples](std::uint32_t row, int col) { return samples.feature(row, col); };

  std::vector<detail_gbt::SortedColumn> cols;
  cols.reserve(kFeatureDim);
  for (int c = 0; c < kFeatureDim; ++c)
    cols.push_back(detail_gbt::sort_column(fit_rows, c, feature_at));

  const std::size_t n_universe = samples.size();
  std::vector<double> residual(n_universe, 0.0);
  std::vector<float> residual_f(n_universe, 0.0f);
  std::vector<double> val_pred(n_universe, 0.0);
  for (std::uint32_t r : fit_rows) {
    residual[r] = samples.target(r);
    residual_f[r] = static_cast<float>(residual[r]);
  }

  GbtModel model;
  model.learning_rate = cfg.learning_rate;
  Rng rng(Rng::splitmix(seed) ^ 0x656e73656d626cULL);
  std::vector<std::int16_t> node_of(n_universe, -1);
  std::vector<std::uint32_t> scratch;
  double best_val = std::numeric_limits<double>::infinity();

  const auto n_fit = static_cast<double>(fit_rows.size());
  const auto n_val = static_cast<double>(val_rows.size());
  auto k_rows = static_cast<std::size_t>(std::llround(cfg.subsample * n_fit));
  k_rows = std::clamp<std::size_t>(k_rows, 1, fit_rows.size());

  for (int round = 0; round < cfg.n_estimators; ++round) {
    scratch = fit_rows;
    for (std::size_t i = 0; i < k_rows && i + 1 < scratch.size(); ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(scratch.size() - i));
      std::swap(scratch[i], scratch[j]);
    }
    scratch.resize(k_rows);

    double sub_before = 0.0;
    for (std::uint32_t r : scratch) {
      sub_before += residual[r] * residual[r];
      node_of[r] = 0;
    }
    model.log.sub_loss_before.push_back(sub_before / static_cast<double>(k_rows));

    std::vector<std::uint32_t> sampled = scratch;  // consumed by the builder
    Tree tree = detail_gbt::build_tree(cols, feature_at, residual, residual_f, node_of, sampled,
                                       cfg.max_depth, cfg.colsample_bylevel, cfg.min_gain, rng);

    double fit_loss = 0.0;
    for (std::uint32_t r : fit_rows) {
      double delta = cfg.learning_rate * tree.predict([&](int col) { return samples.feature(r, col); });
      residual[r] -= delta;
      residual_f[r] = static_cast<float>(residual[r]);
      fit_loss += residual[r] * residual[r];
    }
    model.log.fit_loss.push_back(fit_loss / n_fit);

    double sub_after = 0.0;
    for (std::uint32_t r : scratch) sub_after += residual[r] * residual[r];
    model.log.sub_loss_after.push_back(sub_after / static_cast<double>(k_rows));

    double val_loss = 0.0;
    for (std::uint32_t r : val_rows) {
      val_pred[r] += cfg.learning_rate * tree.predict([&](int col) { return samples.feature(r, col); });
      double e = samples.target(r) - val_pred[r];
      val_loss += e * e;
    }
    val_loss /= n_val;
    model.log.val_loss.push_back(val_loss);
    model.trees.push_back(std::move(tree));

    if (val_loss < best_val) {
      best_val = val_loss;
      model.log.best_round = round;
    } else if (round - model.log.best_round >= cfg.early_stopping_rounds) {
      break;
    }
  }
  model.trees.resize(static_cast<std::size_t>(model.log.best_round + 1));
  return model;
}

}  // namespace feederlab
